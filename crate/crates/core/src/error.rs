use thiserror::Error;

/// Errors raised by parameter validation, pricers, the CVA formulas and the
/// Monte Carlo engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CvaError {
    #[error("correlation domain violated: {0}")]
    CorrelationDomain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unknown parameter set `{0}`")]
    UnknownSet(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("quadrature error: {0}")]
    Quadrature(String),

    #[error("pairing error: {0}")]
    Pairing(String),

    #[error("unsupported pairing for second-order formula: {0}")]
    UnsupportedPairing(String),

    #[error("degenerate sample: {0}")]
    Degenerate(String),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, CvaError>;

impl CvaError {
    /// Prefixes the message with `ctx`, keeping the variant.
    pub fn context(self, ctx: impl std::fmt::Display) -> Self {
        use CvaError::*;
        match self {
            CorrelationDomain(m) => CorrelationDomain(format!("{ctx}: {m}")),
            InvalidParameter(m) => InvalidParameter(format!("{ctx}: {m}")),
            Domain(m) => Domain(format!("{ctx}: {m}")),
            UnknownSet(m) => UnknownSet(format!("{ctx}: {m}")),
            Numerical(m) => Numerical(format!("{ctx}: {m}")),
            Quadrature(m) => Quadrature(format!("{ctx}: {m}")),
            Pairing(m) => Pairing(format!("{ctx}: {m}")),
            UnsupportedPairing(m) => UnsupportedPairing(format!("{ctx}: {m}")),
            Degenerate(m) => Degenerate(format!("{ctx}: {m}")),
            Config(m) => Config(format!("{ctx}: {m}")),
        }
    }

    /// True for errors caused by the inputs rather than by a computation.
    pub fn is_input_error(&self) -> bool {
        use CvaError::*;
        matches!(
            self,
            CorrelationDomain(_) | InvalidParameter(_) | UnknownSet(_) | Pairing(_) | UnsupportedPairing(_) | Config(_)
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn context_keeps_variant() {
        let e = CvaError::Quadrature("no convergence".into()).context("heston-cir rho=0.5");
        assert_eq!(e, CvaError::Quadrature("heston-cir rho=0.5: no convergence".into()));
        assert!(!e.is_input_error());
        assert!(CvaError::Config("x".into()).is_input_error());
    }
}
