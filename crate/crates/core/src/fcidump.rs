//! FCIDUMP integral files.
//!
//! The header is a Fortran namelist `&FCI NORB=..,NELEC=..,MS2=..[,ORBSYM=..][,ISYM=..] &END`
//! (a lone `/` also terminates it), followed by records `value i j k l` with 1-based
//! orbital indices:
//!
//! * `i j k l > 0`: two-electron integral `(ij|kl)` in chemists' notation
//! * `i j > 0, k = l = 0`: one-electron integral `h_ij`
//! * all zero: core energy
//! * `i > 0, j = k = l = 0`: orbital energy (accepted and ignored)
//!
//! Every record is expanded to all of its permutation images; a later record
//! overwrites whatever an earlier one wrote to the same images.

use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Symmetric-pair index `i >= j`.
#[inline]
fn pair(i: usize, j: usize) -> usize {
    let (a, b) = if i >= j { (i, j) } else { (j, i) };
    a * (a + 1) / 2 + b
}

/// Index into 8-fold packed storage of `(pq|rs)`.
#[inline]
fn quad(p: usize, q: usize, r: usize, s: usize) -> usize {
    pair(pair(p, q), pair(r, s))
}

/// Core energy plus one- and two-electron integrals over `norb` spatial orbitals.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralTable {
    pub norb: usize,
    pub nelec: usize,
    pub ms2: i64,
    pub e_core: f64,
    h1: Vec<f64>,
    eri: Vec<f64>,
    pub orbsym: Vec<i64>,
    pub isym: Option<i64>,
}

impl IntegralTable {
    /// An all-zero table with the given header fields.
    pub fn zeros(norb: usize, nelec: usize, ms2: i64) -> Result<Self> {
        validate_header(norb, nelec, ms2)?;
        let npair = norb * (norb + 1) / 2;
        Ok(Self {
            norb,
            nelec,
            ms2,
            e_core: 0.0,
            h1: vec![0.0; norb * norb],
            eri: vec![0.0; npair * (npair + 1) / 2],
            orbsym: Vec::new(),
            isym: None,
        })
    }

    /// Build from dense arrays, checking that every symmetry image agrees within 1e-10.
    ///
    /// `h2` is indexed `h2[((p * n + q) * n + r) * n + s] = (pq|rs)`.
    pub fn from_dense(
        norb: usize,
        nelec: usize,
        ms2: i64,
        e_core: f64,
        h1: &[f64],
        h2: &[f64],
    ) -> Result<Self> {
        let n = norb;
        if h1.len() != n * n || h2.len() != n * n * n * n {
            return Err(Error::Validation(format!(
                "array sizes {} / {} do not match norb = {n}",
                h1.len(),
                h2.len()
            )));
        }
        let mut t = Self::zeros(norb, nelec, ms2)?;
        t.e_core = e_core;
        const TOL: f64 = 1e-10;
        for p in 0..n {
            for q in 0..n {
                let (a, b) = (h1[p * n + q], h1[q * n + p]);
                if (a - b).abs() > TOL {
                    return Err(Error::Validation(format!(
                        "h1[{p}][{q}] = {a} but h1[{q}][{p}] = {b}"
                    )));
                }
                t.h1[p * n + q] = a;
            }
        }
        let at = |p: usize, q: usize, r: usize, s: usize| h2[((p * n + q) * n + r) * n + s];
        for p in 0..n {
            for q in 0..=p {
                for r in 0..n {
                    for s in 0..=r {
                        if pair(p, q) < pair(r, s) {
                            continue;
                        }
                        let v = at(p, q, r, s);
                        for (a, b, c, d) in images(p, q, r, s) {
                            let w = at(a, b, c, d);
                            if (v - w).abs() > TOL {
                                return Err(Error::Validation(format!(
                                    "({p}{q}|{r}{s}) = {v} but ({a}{b}|{c}{d}) = {w}"
                                )));
                            }
                        }
                        t.eri[quad(p, q, r, s)] = v;
                    }
                }
            }
        }
        Ok(t)
    }

    #[inline]
    pub fn h1(&self, p: usize, q: usize) -> f64 {
        self.h1[p * self.norb + q]
    }

    /// Two-electron integral `(pq|rs)` in chemists' notation, 0-based spatial indices.
    #[inline]
    pub fn eri(&self, p: usize, q: usize, r: usize, s: usize) -> f64 {
        self.eri[quad(p, q, r, s)]
    }

    pub fn set_h1(&mut self, p: usize, q: usize, v: f64) {
        self.h1[p * self.norb + q] = v;
        self.h1[q * self.norb + p] = v;
    }

    pub fn set_eri(&mut self, p: usize, q: usize, r: usize, s: usize, v: f64) {
        self.eri[quad(p, q, r, s)] = v;
    }

    /// Electron counts per spin `(n_up, n_down)` implied by `NELEC` and `MS2`.
    pub fn spin_counts(&self) -> (usize, usize) {
        let n = self.nelec as i64;
        (((n + self.ms2) / 2) as usize, ((n - self.ms2) / 2) as usize)
    }

    /// Serialize in FCIDUMP format. Values use the shortest round-trip representation,
    /// so `parse(serialize(t)) == t` bit for bit.
    pub fn to_fcidump(&self) -> String {
        let mut out = String::new();
        let _ = write!(
            out,
            " &FCI NORB={},NELEC={},MS2={},",
            self.norb, self.nelec, self.ms2
        );
        if !self.orbsym.is_empty() {
            out.push_str("\n  ORBSYM=");
            for s in &self.orbsym {
                let _ = write!(out, "{s},");
            }
        }
        if let Some(isym) = self.isym {
            let _ = write!(out, "\n  ISYM={isym},");
        }
        out.push_str("\n &END\n");
        let n = self.norb;
        for p in 0..n {
            for q in 0..=p {
                for r in 0..n {
                    for s in 0..=r {
                        if pair(p, q) < pair(r, s) {
                            continue;
                        }
                        let v = self.eri(p, q, r, s);
                        if v != 0.0 {
                            let _ = writeln!(out, "{v:e} {} {} {} {}", p + 1, q + 1, r + 1, s + 1);
                        }
                    }
                }
            }
        }
        for p in 0..n {
            for q in 0..=p {
                let v = self.h1(p, q);
                if v != 0.0 {
                    let _ = writeln!(out, "{v:e} {} {} 0 0", p + 1, q + 1);
                }
            }
        }
        let _ = writeln!(out, "{:e} 0 0 0 0", self.e_core);
        out
    }

    /// SHA-256 over the header and all nonzero integrals in canonical order.
    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        h.update(b"fcidump-v1");
        h.update((self.norb as u64).to_le_bytes());
        h.update((self.nelec as u64).to_le_bytes());
        h.update(self.ms2.to_le_bytes());
        h.update(self.e_core.to_bits().to_le_bytes());
        let n = self.norb;
        for p in 0..n {
            for q in 0..=p {
                let v = self.h1(p, q);
                if v != 0.0 {
                    h.update([b'h', p as u8, q as u8]);
                    h.update(v.to_bits().to_le_bytes());
                }
            }
        }
        for p in 0..n {
            for q in 0..=p {
                for r in 0..n {
                    for s in 0..=r {
                        if pair(p, q) < pair(r, s) {
                            continue;
                        }
                        let v = self.eri(p, q, r, s);
                        if v != 0.0 {
                            h.update([b'g', p as u8, q as u8, r as u8, s as u8]);
                            h.update(v.to_bits().to_le_bytes());
                        }
                    }
                }
            }
        }
        hex::encode(h.finalize())
    }
}

fn images(p: usize, q: usize, r: usize, s: usize) -> [(usize, usize, usize, usize); 8] {
    [
        (p, q, r, s),
        (q, p, r, s),
        (p, q, s, r),
        (q, p, s, r),
        (r, s, p, q),
        (s, r, p, q),
        (r, s, q, p),
        (s, r, q, p),
    ]
}

fn validate_header(norb: usize, nelec: usize, ms2: i64) -> Result<()> {
    if norb == 0 || norb > 64 {
        return Err(Error::Validation(format!("NORB = {norb} outside 1..=64")));
    }
    if nelec == 0 || nelec > 2 * norb {
        return Err(Error::Validation(format!(
            "NELEC = {nelec} outside 1..={}",
            2 * norb
        )));
    }
    if ms2.unsigned_abs() as usize > nelec || (nelec as i64 + ms2) % 2 != 0 {
        return Err(Error::Validation(format!(
            "MS2 = {ms2} inconsistent with NELEC = {nelec}"
        )));
    }
    let (up, down) = (
        (nelec as i64 + ms2) / 2,
        (nelec as i64 - ms2) / 2,
    );
    if up as usize > norb || down as usize > norb {
        return Err(Error::Validation(format!(
            "{up} up / {down} down electrons do not fit in {norb} orbitals"
        )));
    }
    Ok(())
}

pub fn read_fcidump(path: impl AsRef<Path>) -> Result<IntegralTable> {
    let bytes = std::fs::read(path.as_ref())?;
    parse_fcidump(&bytes)
}

/// Parse an FCIDUMP byte stream into a fully symmetrized table.
pub fn parse_fcidump(bytes: &[u8]) -> Result<IntegralTable> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Parse {
        line: 1 + bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count(),
        message: "input is not valid UTF-8".into(),
    })?;
    let lines: Vec<&str> = text.lines().collect();

    let (header, body_start) = read_header(&lines)?;
    let norb = header.get_int("NORB")?.ok_or(Error::Parse {
        line: header.first_line,
        message: "header lacks NORB".into(),
    })?;
    let nelec = header.get_int("NELEC")?.ok_or(Error::Parse {
        line: header.first_line,
        message: "header lacks NELEC".into(),
    })?;
    let ms2 = header.get_int("MS2")?.unwrap_or(0);
    if norb < 0 || nelec < 0 {
        return Err(Error::Parse {
            line: header.first_line,
            message: "NORB and NELEC must be non-negative".into(),
        });
    }
    let mut table = IntegralTable::zeros(norb as usize, nelec as usize, ms2)?;
    table.orbsym = header.get_list("ORBSYM")?;
    table.isym = header.get_int("ISYM")?;

    let n = norb as usize;
    for (offset, raw) in lines[body_start..].iter().enumerate() {
        let line = body_start + offset + 1;
        let fields: Vec<&str> = raw.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 5 {
            return Err(Error::Parse {
                line,
                message: format!("expected `value i j k l`, found {} fields", fields.len()),
            });
        }
        let value = parse_real(fields[0]).ok_or_else(|| Error::Parse {
            line,
            message: format!("non-numeric value `{}`", fields[0]),
        })?;
        let mut idx = [0usize; 4];
        for (slot, f) in idx.iter_mut().zip(&fields[1..]) {
            let v: i64 = f.parse().map_err(|_| Error::Parse {
                line,
                message: format!("non-integer index `{f}`"),
            })?;
            if v < 0 || v as usize > n {
                return Err(Error::Parse {
                    line,
                    message: format!("index {v} outside [0, {n}]"),
                });
            }
            *slot = v as usize;
        }
        match idx {
            [0, 0, 0, 0] => table.e_core = value,
            [i, j, 0, 0] if i > 0 && j > 0 => table.set_h1(i - 1, j - 1, value),
            [_, 0, 0, 0] => {}
            [i, j, k, l] if i > 0 && j > 0 && k > 0 && l > 0 => {
                table.set_eri(i - 1, j - 1, k - 1, l - 1, value)
            }
            _ => {
                return Err(Error::Parse {
                    line,
                    message: format!("unsupported index pattern {idx:?}"),
                })
            }
        }
    }
    Ok(table)
}

/// Accepts Fortran `D`/`d` exponents.
fn parse_real(s: &str) -> Option<f64> {
    let v: f64 = if s.contains(['D', 'd']) {
        s.replace(['D', 'd'], "E").parse().ok()?
    } else {
        s.parse().ok()?
    };
    v.is_finite().then_some(v)
}

struct Header {
    first_line: usize,
    entries: Vec<(String, Vec<String>, usize)>,
}

impl Header {
    fn find(&self, key: &str) -> Option<&(String, Vec<String>, usize)> {
        self.entries.iter().rev().find(|(k, _, _)| k == key)
    }

    fn get_int(&self, key: &str) -> Result<Option<i64>> {
        let Some((_, vals, line)) = self.find(key) else {
            return Ok(None);
        };
        match vals.as_slice() {
            [v] => v.parse().map(Some).map_err(|_| Error::Parse {
                line: *line,
                message: format!("{key} = `{v}` is not an integer"),
            }),
            _ => Err(Error::Parse {
                line: *line,
                message: format!("{key} expects one value, found {}", vals.len()),
            }),
        }
    }

    fn get_list(&self, key: &str) -> Result<Vec<i64>> {
        let Some((_, vals, line)) = self.find(key) else {
            return Ok(Vec::new());
        };
        vals.iter()
            .map(|v| {
                v.parse().map_err(|_| Error::Parse {
                    line: *line,
                    message: format!("{key} entry `{v}` is not an integer"),
                })
            })
            .collect()
    }
}

/// Collect the namelist; returns it and the index of the first record line.
fn read_header(lines: &[&str]) -> Result<(Header, usize)> {
    let start = lines
        .iter()
        .position(|l| !l.trim().is_empty())
        .ok_or(Error::Parse {
            line: 1,
            message: "empty input".into(),
        })?;
    let first = lines[start].trim_start();
    if !first.to_ascii_uppercase().starts_with("&FCI") {
        return Err(Error::Parse {
            line: start + 1,
            message: "expected `&FCI` namelist header".into(),
        });
    }
    let mut header = Header {
        first_line: start + 1,
        entries: Vec::new(),
    };
    for (i, raw) in lines.iter().enumerate().skip(start) {
        let line_no = i + 1;
        let mut text = raw.trim().to_string();
        if i == start {
            text = text[4..].to_string();
        }
        // Normalise `KEY = value` to `KEY=value` so that tokens split cleanly.
        while text.contains(" =") || text.contains("= ") {
            text = text.replace(" =", "=").replace("= ", "=");
        }
        for token in text.split(|c: char| c == ',' || c.is_whitespace()) {
            if token.is_empty() {
                continue;
            }
            let upper = token.to_ascii_uppercase();
            if upper == "&END" || upper == "/" || upper == "$END" || upper == "&" {
                return Ok((header, i + 1));
            }
            let (body, ends) = match upper.strip_suffix('/') {
                Some(b) => (b.to_string(), true),
                None => (upper, false),
            };
            if let Some((k, v)) = body.split_once('=') {
                if k.is_empty() {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("malformed header token `{token}`"),
                    });
                }
                let vals = if v.is_empty() { vec![] } else { vec![v.to_string()] };
                header.entries.push((k.to_string(), vals, line_no));
            } else if !body.is_empty() {
                match header.entries.last_mut() {
                    Some((_, vals, _)) => vals.push(body),
                    None => {
                        return Err(Error::Parse {
                            line: line_no,
                            message: format!("value `{token}` before any key"),
                        })
                    }
                }
            }
            if ends {
                return Ok((header, i + 1));
            }
        }
    }
    Err(Error::Parse {
        line: lines.len(),
        message: "header is missing its `&END` terminator".into(),
    })
}
