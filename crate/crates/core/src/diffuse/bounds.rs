use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::series::{random_unit_vector, FieldVector, OperatorFamily};

/// Relative tolerance allowed for the discretized kernels against the
/// continuum growth constants.
pub const DEFAULT_QUADRATURE_SLACK: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrderRatio {
    pub order: usize,
    pub max_ratio: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelBoundReport {
    pub slack: f64,
    pub samples: usize,
    pub orders: Vec<OrderRatio>,
}

impl KernelBoundReport {
    pub fn max_ratio(&self) -> f64 {
        self.orders.iter().fold(0.0, |a, o| a.max(o.max_ratio))
    }

    pub fn passed(&self) -> bool {
        self.orders.iter().all(|o| !o.flagged)
    }
}

/// Samples `n_samples` random unit-norm tuples for each order `1..=max_m`
/// and records the largest `|K_m(..)| / (nu mu^{m-1})`.
pub fn kernel_bound_check<F: OperatorFamily + ?Sized>(
    family: &F,
    max_m: usize,
    n_samples: usize,
    seed: u64,
    slack: f64,
) -> Result<KernelBoundReport> {
    if max_m == 0 || max_m > family.max_order() {
        return Err(Error::UnsupportedOrder {
            requested: max_m,
            max: family.max_order(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bounds = family.bounds();
    let weights = family.weights_x();
    let mut orders = Vec::with_capacity(max_m);
    for m in 1..=max_m {
        let limit = bounds.order_bound(m);
        let mut worst = 0.0_f64;
        for _ in 0..n_samples {
            let args: Vec<FieldVector> = (0..m)
                .map(|_| random_unit_vector(weights, &mut rng))
                .collect();
            let refs: Vec<&FieldVector> = args.iter().collect();
            worst = worst.max(family.norm_y(&family.evaluate(&refs)) / limit);
        }
        orders.push(OrderRatio {
            order: m,
            max_ratio: worst,
            flagged: worst > 1.0 + slack,
        });
    }
    Ok(KernelBoundReport {
        slack,
        samples: n_samples,
        orders,
    })
}
