use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;

use super::{apply_ladder, enumerate_sector, spin_orbital, Determinant, Ladder, SectorWaveFunction, Spin};
use crate::error::{Error, Result};

/// Below this `<A†A>` the perturbed state is treated as zero.
pub const ZERO_PERTURBATION: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Factor {
    pub kind: Ladder,
    pub spatial: usize,
    pub spin: Spin,
}

impl Factor {
    #[inline]
    pub fn spin_orbital(&self) -> usize {
        spin_orbital(self.spatial, self.spin)
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k = match self.kind {
            Ladder::Create => '+',
            Ladder::Annihilate => '-',
        };
        let s = match self.spin {
            Spin::Up => 'u',
            Spin::Down => 'd',
        };
        write!(f, "{k}{}.{s}", self.spatial)
    }
}

/// Ordered product of ladder operators, written left to right as in `c†_6 c†_5 c_4 c_3`;
/// the rightmost factor acts first.
///
/// Text form: whitespace-separated `+p.s` (create) / `-p.s` (annihilate) with `s` in
/// `{u, d}`, e.g. `+6.u +5.u -4.u -3.u`. A bare `+p` / `-p` means spatial orbital `p`
/// with spin up.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ExcitationOperator {
    pub factors: Vec<Factor>,
}

impl ExcitationOperator {
    pub fn identity() -> Self {
        Self::default()
    }

    /// Net change in `(n_up, n_down)`.
    pub fn particle_change(&self) -> (i64, i64) {
        self.factors.iter().fold((0, 0), |(u, d), f| {
            let delta = match f.kind {
                Ladder::Create => 1,
                Ladder::Annihilate => -1,
            };
            match f.spin {
                Spin::Up => (u + delta, d),
                Spin::Down => (u, d + delta),
            }
        })
    }

    /// Apply to a single determinant; `None` if annihilated.
    pub fn apply_to(&self, d: Determinant) -> Option<(Determinant, f64)> {
        let mut det = d;
        let mut sign = 1.0;
        for f in self.factors.iter().rev() {
            let (nd, s) = apply_ladder(det, f.kind, f.spin_orbital())?;
            det = nd;
            sign *= s;
        }
        Some((det, sign))
    }

    /// `A|psi>` normalized, together with `<psi|A†A|psi>` for normalized `psi`.
    pub fn apply(&self, psi: &SectorWaveFunction) -> Result<(SectorWaveFunction, f64)> {
        let src = &psi.sector;
        if let Some(f) = self.factors.iter().find(|f| f.spatial >= src.norb) {
            return Err(Error::Operator(format!(
                "factor {f} addresses orbital {} but only {} exist",
                f.spatial, src.norb
            )));
        }
        let (du, dd) = self.particle_change();
        let n_up = src.n_up as i64 + du;
        let n_down = src.n_down as i64 + dd;
        if n_up < 0 || n_down < 0 || n_up > src.norb as i64 || n_down > src.norb as i64 {
            return Err(Error::Operator(format!(
                "target sector ({n_up}, {n_down}) is empty"
            )));
        }
        let target = if (n_up as usize, n_down as usize) == (src.n_up, src.n_down) {
            Arc::clone(src)
        } else {
            Arc::new(enumerate_sector(src.norb, n_up as usize, n_down as usize)?)
        };
        let mut out = SectorWaveFunction::zeros(Arc::clone(&target));
        for (&d, &a) in src.dets().iter().zip(&psi.amps) {
            if a == Complex64::new(0.0, 0.0) {
                continue;
            }
            if let Some((nd, s)) = self.apply_to(d) {
                let j = target
                    .index_of(nd)
                    .expect("particle-number bookkeeping keeps results in the target sector");
                out.amps[j] += a * s;
            }
        }
        let norm2 = out.norm_sqr();
        if norm2 < ZERO_PERTURBATION {
            return Err(Error::ZeroPerturbation { norm2 });
        }
        out.normalize();
        Ok((out, norm2))
    }
}

impl fmt::Display for ExcitationOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.factors.iter().map(|x| x.to_string()).collect();
        f.write_str(&parts.join(" "))
    }
}

impl FromStr for ExcitationOperator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let factors = s
            .split_whitespace()
            .map(|tok| {
                let kind = match tok.chars().next() {
                    Some('+') => Ladder::Create,
                    Some('-') => Ladder::Annihilate,
                    _ => {
                        return Err(Error::Operator(format!(
                            "`{tok}` must start with `+` or `-`"
                        )))
                    }
                };
                let body = &tok[1..];
                let (orb, spin) = match body.split_once('.') {
                    Some((o, "u")) => (o, Spin::Up),
                    Some((o, "d")) => (o, Spin::Down),
                    Some((_, other)) => {
                        return Err(Error::Operator(format!(
                            "spin `{other}` in `{tok}` is not `u` or `d`"
                        )))
                    }
                    None => (body, Spin::Up),
                };
                let spatial = orb.parse::<usize>().map_err(|_| {
                    Error::Operator(format!("orbital index in `{tok}` is not a number"))
                })?;
                Ok(Factor {
                    kind,
                    spatial,
                    spin,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { factors })
    }
}
