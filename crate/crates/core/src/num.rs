//! Floating-point scalar abstraction: f32 or f64.

/// Trait bound for the scalar type the pure math layer is generic over.
pub trait Float:
    num_traits::Float + num_traits::FromPrimitive + num_traits::NumAssign + std::fmt::Debug
{
    /// Lifts an `f64` constant into the scalar type.
    fn c(value: f64) -> Self {
        Self::from_f64(value).expect("constant representable in scalar type")
    }
}

impl Float for f32 {}
impl Float for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_lift_round_trips() {
        assert_eq!(f64::c(37.6), 37.6);
        assert_eq!(f32::c(0.5), 0.5f32);
    }
}
