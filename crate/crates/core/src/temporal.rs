//! Causal temporal filter over past spatial maps.
//!
//! For the newest frame `k` the temporal map is the per-pixel range of the
//! spatial maps at `k`, `k - gap` and `k - 2*gap`, normalized by its global
//! maximum. Only frames already pushed are read, so the first `2*gap`
//! frames of a stream produce no map.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plane::{FeatureMap, Plane};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TemporalConfig {
    /// Frame stride `n` between the three sampled spatial maps.
    pub gap: usize,
}

impl Default for TemporalConfig {
    fn default() -> Self {
        TemporalConfig { gap: 5 }
    }
}

impl TemporalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.gap == 0 {
            return Err(Error::InvalidConfig("temporal gap must be >= 1".into()));
        }
        Ok(())
    }

    /// Number of frames held by the buffer, `2n + 1`.
    pub fn window(&self) -> usize {
        2 * self.gap + 1
    }
}

/// Ring buffer of the last `2n + 1` spatial maps, keyed by frame index.
#[derive(Clone, Debug)]
pub struct SmapBuffer {
    gap: usize,
    maps: VecDeque<(u64, FeatureMap)>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum TemporalOutput {
    /// Not enough history yet; `have` of `need` maps are buffered.
    WarmingUp {
        have: usize,
        need: usize,
    },
    Ready(FeatureMap),
}

impl SmapBuffer {
    pub fn new(cfg: &TemporalConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(SmapBuffer {
            gap: cfg.gap,
            maps: VecDeque::with_capacity(cfg.window()),
        })
    }

    pub fn gap(&self) -> usize {
        self.gap
    }

    pub fn capacity(&self) -> usize {
        2 * self.gap + 1
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn newest_index(&self) -> Option<u64> {
        self.maps.back().map(|(i, _)| *i)
    }

    /// Indices currently held, oldest first.
    pub fn indices(&self) -> impl Iterator<Item = u64> + '_ {
        self.maps.iter().map(|(i, _)| *i)
    }

    pub fn get(&self, index: u64) -> Option<&FeatureMap> {
        let oldest = self.maps.front()?.0;
        let slot = index.checked_sub(oldest)? as usize;
        self.maps.get(slot).map(|(_, m)| m)
    }

    /// True once frames `k`, `k - n` and `k - 2n` are all present.
    pub fn is_ready(&self) -> bool {
        self.maps.len() == self.capacity()
    }

    /// Appends the map for `index`, which must directly follow the newest one.
    pub fn push(&mut self, index: u64, smap: FeatureMap) -> Result<()> {
        if let Some((newest, first)) = self.maps.back() {
            if index != newest + 1 {
                return Err(Error::IndexOrder {
                    expected: newest + 1,
                    got: index,
                });
            }
            first.ensure_same_dims(&smap)?;
        }
        if self.maps.len() == self.capacity() {
            self.maps.pop_front();
        }
        self.maps.push_back((index, smap));
        Ok(())
    }

    /// The three maps `(k, k - n, k - 2n)` when ready.
    pub fn triple(&self) -> Option<[&FeatureMap; 3]> {
        if !self.is_ready() {
            return None;
        }
        let k = self.newest_index()?;
        let n = self.gap as u64;
        Some([self.get(k)?, self.get(k - n)?, self.get(k - 2 * n)?])
    }
}

/// Per-pixel `max - min` over three equally sized maps, unnormalized.
pub fn temporal_range(a: &FeatureMap, b: &FeatureMap, c: &FeatureMap) -> Result<FeatureMap> {
    a.ensure_same_dims(b)?;
    a.ensure_same_dims(c)?;
    let data = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .zip(c.as_slice())
        .map(|((&x, &y), &z)| x.max(y).max(z) - x.min(y).min(z))
        .collect();
    Plane::new(a.width(), a.height(), data)
}

/// Divides an `f32` map by its global maximum; all-zero maps stay zero.
pub fn normalize_map(map: &FeatureMap) -> FeatureMap {
    let peak = map.max_value() as f64;
    if peak <= 0.0 {
        return map.map(|_| 0.0);
    }
    map.map(|v| (v as f64 / peak) as f32)
}

/// Normalized temporal map for the newest buffered frame.
pub fn compute_tmap(buffer: &SmapBuffer) -> Result<TemporalOutput> {
    match buffer.triple() {
        None => Ok(TemporalOutput::WarmingUp {
            have: buffer.len(),
            need: buffer.capacity(),
        }),
        Some([k, kn, k2n]) => Ok(TemporalOutput::Ready(normalize_map(&temporal_range(
            k, kn, k2n,
        )?))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(v: f32) -> FeatureMap {
        Plane::filled(4, 3, v)
    }

    #[test]
    fn readiness_counts() {
        let mut buf = SmapBuffer::new(&TemporalConfig { gap: 5 }).unwrap();
        for i in 0..10 {
            buf.push(i, flat(0.0)).unwrap();
        }
        assert!(!buf.is_ready());
        assert_eq!(
            compute_tmap(&buf).unwrap(),
            TemporalOutput::WarmingUp { have: 10, need: 11 }
        );
        buf.push(10, flat(0.0)).unwrap();
        assert!(buf.is_ready());
        assert_eq!(
            buf.indices().collect::<Vec<_>>(),
            (0..=10).collect::<Vec<_>>()
        );
    }

    #[test]
    fn rejects_duplicate_gap_and_resize() {
        let mut buf = SmapBuffer::new(&TemporalConfig { gap: 2 }).unwrap();
        buf.push(7, flat(0.0)).unwrap();
        assert!(matches!(
            buf.push(7, flat(0.0)),
            Err(Error::IndexOrder {
                expected: 8,
                got: 7
            })
        ));
        assert!(buf.push(9, flat(0.0)).is_err());
        assert!(matches!(
            buf.push(8, Plane::filled(5, 3, 0.0)),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(SmapBuffer::new(&TemporalConfig { gap: 0 }).is_err());
    }

    #[test]
    fn memory_stays_bounded() {
        let cfg = TemporalConfig { gap: 3 };
        let mut buf = SmapBuffer::new(&cfg).unwrap();
        for i in 0..500 {
            buf.push(i, flat(i as f32)).unwrap();
            assert!(buf.len() <= cfg.window());
        }
        assert_eq!(buf.indices().next(), Some(493));
        let [k, kn, k2n] = buf.triple().unwrap();
        assert_eq!(
            (k.get(0, 0), kn.get(0, 0), k2n.get(0, 0)),
            (499.0, 496.0, 493.0)
        );
    }

    #[test]
    fn range_of_single_spike() {
        let mut a = flat(0.0);
        a.set(1, 1, 0.64);
        let raw = temporal_range(&a, &flat(0.0), &flat(0.0)).unwrap();
        assert_eq!(raw.get(1, 1), 0.64);
        assert_eq!(normalize_map(&raw).get(1, 1), 1.0);
    }

    #[test]
    fn static_scene_gives_zero_map() {
        let mut buf = SmapBuffer::new(&TemporalConfig { gap: 1 }).unwrap();
        let mut m = flat(0.2);
        m.set(2, 2, 0.9);
        for i in 0..3 {
            buf.push(i, m.clone()).unwrap();
        }
        match compute_tmap(&buf).unwrap() {
            TemporalOutput::Ready(t) => assert!(t.as_slice().iter().all(|&v| v == 0.0)),
            other => panic!("unexpected {other:?}"),
        }
    }
}
