//! Benchmark fixtures.

use rtga_core::harness::{random_unit_weights, AlgorithmSpec, Preset};
use rtga_core::noise::case_spec;
use rtga_core::reuse::SampleHistory;
use rtga_core::signal::{EivStream, TrueSystem, WhiteGaussian};
use rtga_core::CostModel;

/// A recorded Case-1 stream for one filter order.
pub struct Fixture {
    pub order: usize,
    pub w_o: Vec<f64>,
    pub x_tilde: Vec<Vec<f64>>,
    pub d_tilde: Vec<f64>,
}

impl Fixture {
    pub fn case1(order: usize, samples: usize) -> Self {
        let w_o = random_unit_weights(order, 7);
        let system = TrueSystem::new(w_o.clone()).unwrap();
        let mut s = EivStream::new(system, WhiteGaussian::new(7), case_spec(1).unwrap(), 7).unwrap();
        let (mut x_tilde, mut d_tilde) = (Vec::with_capacity(samples), Vec::with_capacity(samples));
        for _ in 0..samples {
            let v = s.advance().unwrap();
            x_tilde.push(v.x_tilde.to_vec());
            d_tilde.push(v.d_tilde);
        }
        Self {
            order,
            w_o,
            x_tilde,
            d_tilde,
        }
    }

    /// History holding every sample of the fixture.
    pub fn history(&self) -> SampleHistory {
        let mut h = SampleHistory::full(self.order);
        for (x, d) in self.x_tilde.iter().zip(&self.d_tilde) {
            h.push(x[0], *d);
        }
        h
    }
}

pub fn spec(preset: Preset) -> AlgorithmSpec {
    AlgorithmSpec::preset(preset, 1).unwrap()
}

pub fn model(preset: Preset) -> CostModel {
    spec(preset).model().unwrap()
}
