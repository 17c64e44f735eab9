use crate::error::Result;
use crate::seeding::SimRng;

/// A prior over a domain's utility parameters, from which hypotheses are drawn.
pub trait UtilityPrior {
    type Utility;

    fn validate(&self) -> Result<()>;

    fn sample(&self, rng: &mut SimRng) -> Self::Utility;

    /// Small random move within the prior's support, used to rejuvenate
    /// duplicated particles after resampling.
    fn jitter(&self, utility: &Self::Utility, scale: f64, rng: &mut SimRng) -> Self::Utility;
}
