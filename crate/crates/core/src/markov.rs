//! Continuous-time Markov chain paths over the network modes.

use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::error::{Error, Result};
use crate::topology::SwitchingNetwork;

/// One sojourn of the chain: mode `mode` on `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub mode: usize,
    pub start: f64,
    pub end: f64,
}

/// Piecewise-constant mode trajectory tiling `[0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModePath {
    pub segments: Vec<Segment>,
    pub horizon: f64,
    /// Set when the chain entered a mode with zero exit rate.
    pub absorbed: bool,
}

impl ModePath {
    pub fn initial_mode(&self) -> usize {
        self.segments[0].mode
    }

    /// Switch instants in `(0, horizon)` with the mode entered at each.
    pub fn switches(&self) -> impl Iterator<Item = (f64, usize)> + '_ {
        self.segments.iter().skip(1).map(|s| (s.start, s.mode))
    }

    pub fn mode_at(&self, t: f64) -> usize {
        let idx = self.segments.partition_point(|s| s.start <= t);
        self.segments[idx.saturating_sub(1)].mode
    }
}

/// Exit rate `q_u = -Q[u][u]` of mode `u`.
pub fn sojourn_rate(net: &SwitchingNetwork, mode: usize) -> f64 {
    -net.generator[(mode, mode)]
}

/// Draws the mode entered when leaving `mode`, with probability
/// `-q_uv / q_uu` for each `v != u`.
pub fn sample_transition<R: Rng + ?Sized>(
    net: &SwitchingNetwork,
    mode: usize,
    rng: &mut R,
) -> Result<usize> {
    let rate = sojourn_rate(net, mode);
    if rate <= 0.0 {
        return Err(Error::AbsorbingMode(mode + 1));
    }
    let draw = rng.random::<f64>() * rate;
    let mut acc = 0.0;
    let mut last = None;
    for v in 0..net.mode_count() {
        if v == mode {
            continue;
        }
        let q = net.generator[(mode, v)];
        if q <= 0.0 {
            continue;
        }
        acc += q;
        last = Some(v);
        if draw < acc {
            return Ok(v);
        }
    }
    // Rounding in the cumulative sum can leave `draw` just above `acc`.
    last.ok_or(Error::AbsorbingMode(mode + 1))
}

/// Samples a path of the chain started in `initial` over `[0, horizon]`.
pub fn generate_path<R: Rng + ?Sized>(
    net: &SwitchingNetwork,
    initial: usize,
    horizon: f64,
    rng: &mut R,
) -> Result<ModePath> {
    if !(horizon > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    if initial >= net.mode_count() {
        return Err(Error::InvalidParameter(format!(
            "initial mode {} out of range 1..={}",
            initial + 1,
            net.mode_count()
        )));
    }

    let mut segments = Vec::new();
    let mut mode = initial;
    let mut t = 0.0;
    let mut absorbed = false;
    loop {
        let rate = sojourn_rate(net, mode);
        if rate <= 0.0 {
            if net.mode_count() > 1 {
                log::warn!("mode {} is absorbing; path stays there", mode + 1);
                absorbed = true;
            }
            segments.push(Segment {
                mode,
                start: t,
                end: horizon,
            });
            break;
        }
        let sojourn = Exp::new(rate)
            .map_err(|e| Error::Internal(format!("exponential rate {rate}: {e}")))?
            .sample(rng);
        let end = t + sojourn;
        if end >= horizon {
            segments.push(Segment {
                mode,
                start: t,
                end: horizon,
            });
            break;
        }
        segments.push(Segment {
            mode,
            start: t,
            end,
        });
        mode = sample_transition(net, mode, rng)?;
        t = end;
    }
    Ok(ModePath {
        segments,
        horizon,
        absorbed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::GraphMode;
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn net_with(generator: &[f64], n: usize) -> SwitchingNetwork {
        let mode = GraphMode::from_edges(&[(0, 1)], 2, &[0]).unwrap();
        SwitchingNetwork::new(
            vec![mode; n],
            DMatrix::from_row_slice(n, n, generator),
        )
        .unwrap()
    }

    #[test]
    fn rates_read_from_diagonal() {
        let net = net_with(&[-2.0, 2.0, 3.0, -3.0], 2);
        assert_eq!(sojourn_rate(&net, 1), 3.0);
        let single = net_with(&[0.0], 1);
        assert_eq!(sojourn_rate(&single, 0), 0.0);
    }

    #[test]
    fn two_state_transition_is_forced() {
        let net = net_with(&[-2.0, 2.0, 3.0, -3.0], 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            assert_eq!(sample_transition(&net, 0, &mut rng).unwrap(), 1);
        }
    }

    #[test]
    fn absorbing_mode_cannot_transition() {
        let net = net_with(&[0.0, 0.0, 1.0, -1.0], 2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            sample_transition(&net, 0, &mut rng),
            Err(Error::AbsorbingMode(1))
        ));
        let path = generate_path(&net, 1, 100.0, &mut rng).unwrap();
        assert!(path.absorbed);
        assert_eq!(path.segments.last().unwrap().mode, 0);
    }

    #[test]
    fn single_mode_path_is_one_segment() {
        let net = net_with(&[0.0], 1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let path = generate_path(&net, 0, 5.0, &mut rng).unwrap();
        assert_eq!(
            path.segments,
            vec![Segment {
                mode: 0,
                start: 0.0,
                end: 5.0
            }]
        );
        assert!(!path.absorbed);
    }

    #[test]
    fn mode_lookup() {
        let path = ModePath {
            segments: vec![
                Segment { mode: 2, start: 0.0, end: 0.5 },
                Segment { mode: 0, start: 0.5, end: 1.0 },
            ],
            horizon: 1.0,
            absorbed: false,
        };
        assert_eq!(path.mode_at(0.0), 2);
        assert_eq!(path.mode_at(0.49), 2);
        assert_eq!(path.mode_at(0.5), 0);
        assert_eq!(path.switches().collect::<Vec<_>>(), vec![(0.5, 0)]);
    }
}
