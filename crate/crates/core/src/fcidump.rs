//! FCIDUMP reader and the integral table it produces.
//!
//! Orbital indices are 1-based in the file and 0-based in [`IntegralTable`].
//! Two-body integrals are chemist-notation `(pq|rs)` and are stored once per
//! 8-fold symmetry class.

use std::collections::HashMap;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FcidumpError {
    #[error("missing {0} in FCIDUMP header")]
    MissingField(&'static str),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: orbital index {index} out of range 1..={norb}")]
    IndexOutOfRange { line: usize, index: usize, norb: usize },
    #[error("{0} electrons do not fit in {1} spatial orbitals")]
    TooManyElectrons(usize, usize),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct IntegralTable {
    n_orbitals: usize,
    n_electrons: usize,
    ms2: i64,
    core_energy: f64,
    one_body: HashMap<(usize, usize), f64>,
    two_body: HashMap<[usize; 4], f64>,
}

fn canon_pair(p: usize, q: usize) -> (usize, usize) {
    if p >= q {
        (p, q)
    } else {
        (q, p)
    }
}

fn canon_quad(p: usize, q: usize, r: usize, s: usize) -> [usize; 4] {
    let a = canon_pair(p, q);
    let b = canon_pair(r, s);
    let (a, b) = if a >= b { (a, b) } else { (b, a) };
    [a.0, a.1, b.0, b.1]
}

impl IntegralTable {
    pub fn new(n_orbitals: usize, n_electrons: usize, core_energy: f64) -> Result<Self, FcidumpError> {
        if n_electrons > 2 * n_orbitals {
            return Err(FcidumpError::TooManyElectrons(n_electrons, n_orbitals));
        }
        Ok(Self { n_orbitals, n_electrons, core_energy, ..Default::default() })
    }

    pub fn n_orbitals(&self) -> usize {
        self.n_orbitals
    }

    pub fn n_spin_orbitals(&self) -> usize {
        2 * self.n_orbitals
    }

    pub fn n_electrons(&self) -> usize {
        self.n_electrons
    }

    pub fn ms2(&self) -> i64 {
        self.ms2
    }

    pub fn core_energy(&self) -> f64 {
        self.core_energy
    }

    pub fn set_core_energy(&mut self, e: f64) {
        self.core_energy = e;
    }

    /// Sets `h_pq = h_qp` (0-based).
    pub fn set_one_body(&mut self, p: usize, q: usize, value: f64) {
        assert!(p < self.n_orbitals && q < self.n_orbitals, "orbital index out of range");
        self.one_body.insert(canon_pair(p, q), value);
    }

    /// Sets `(pq|rs)` and all its symmetry partners (0-based).
    pub fn set_two_body(&mut self, p: usize, q: usize, r: usize, s: usize, value: f64) {
        let n = self.n_orbitals;
        assert!(p < n && q < n && r < n && s < n, "orbital index out of range");
        self.two_body.insert(canon_quad(p, q, r, s), value);
    }

    pub fn one_body(&self, p: usize, q: usize) -> f64 {
        self.one_body.get(&canon_pair(p, q)).copied().unwrap_or(0.0)
    }

    /// Chemist-notation `(pq|rs)`.
    pub fn two_body(&self, p: usize, q: usize, r: usize, s: usize) -> f64 {
        self.two_body.get(&canon_quad(p, q, r, s)).copied().unwrap_or(0.0)
    }

    /// Reads FCIDUMP text.
    pub fn parse_fcidump(text: &str) -> Result<Self, FcidumpError> {
        let mut lines = text.lines().enumerate();
        let mut header = String::new();
        let mut header_closed = false;
        for (_, line) in lines.by_ref() {
            let t = line.trim();
            let upper = t.to_ascii_uppercase();
            if upper.ends_with("&END") || upper == "/" || upper.ends_with('/') {
                header.push_str(&t[..t.len() - if upper.ends_with("&END") { 4 } else { 1 }]);
                header_closed = true;
                break;
            }
            header.push_str(t);
            header.push(',');
        }
        if !header_closed {
            return Err(FcidumpError::MissingField("&END"));
        }
        let fields = parse_namelist(&header);
        let get = |key: &'static str| -> Result<Option<i64>, FcidumpError> {
            match fields.get(key).and_then(|v| v.first()) {
                None => Ok(None),
                Some(v) => v.parse::<i64>().map(Some).map_err(|_| FcidumpError::Malformed {
                    line: 1,
                    message: format!("{key}={v} is not an integer"),
                }),
            }
        };
        let norb = get("NORB")?.ok_or(FcidumpError::MissingField("NORB"))?;
        let nelec = get("NELEC")?.ok_or(FcidumpError::MissingField("NELEC"))?;
        let ms2 = get("MS2")?.unwrap_or(0);
        if norb < 0 || nelec < 0 {
            return Err(FcidumpError::Malformed { line: 1, message: "negative NORB or NELEC".into() });
        }
        let mut table = Self::new(norb as usize, nelec as usize, 0.0)?;
        table.ms2 = ms2;
        let norb = norb as usize;

        for (i, line) in lines {
            let line_no = i + 1;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            let parts: Vec<&str> = t.split_whitespace().collect();
            if parts.len() != 5 {
                return Err(FcidumpError::Malformed {
                    line: line_no,
                    message: format!("expected `value i j k l`, got {t:?}"),
                });
            }
            let value: f64 = parse_fortran_float(parts[0]).ok_or_else(|| FcidumpError::Malformed {
                line: line_no,
                message: format!("bad value {:?}", parts[0]),
            })?;
            let mut idx = [0usize; 4];
            for (slot, s) in idx.iter_mut().zip(&parts[1..]) {
                *slot = s.parse().map_err(|_| FcidumpError::Malformed {
                    line: line_no,
                    message: format!("bad index {s:?}"),
                })?;
                if *slot > norb {
                    return Err(FcidumpError::IndexOutOfRange { line: line_no, index: *slot, norb });
                }
            }
            match idx {
                [0, 0, 0, 0] => table.core_energy = value,
                // orbital energies; not part of the Hamiltonian
                [_, 0, 0, 0] => {}
                [i, j, 0, 0] if i > 0 && j > 0 => table.set_one_body(i - 1, j - 1, value),
                [i, j, k, l] if i > 0 && j > 0 && k > 0 && l > 0 => {
                    table.set_two_body(i - 1, j - 1, k - 1, l - 1, value)
                }
                _ => {
                    return Err(FcidumpError::Malformed {
                        line: line_no,
                        message: format!("unrecognized index pattern {idx:?}"),
                    })
                }
            }
        }
        Ok(table)
    }
}

/// Splits `&FCI NORB=2,NELEC=2,ORBSYM=1,1,` into key → values.
fn parse_namelist(header: &str) -> HashMap<String, Vec<String>> {
    let body = header.trim_start();
    let body = body.strip_prefix("&FCI").or_else(|| body.strip_prefix("&fci")).unwrap_or(body);
    let mut out: HashMap<String, Vec<String>> = HashMap::new();
    let mut current: Option<String> = None;
    for tok in body.split([',', ' ', '\t']).filter(|t| !t.is_empty()) {
        if let Some((k, v)) = tok.split_once('=') {
            let key = k.trim().to_ascii_uppercase();
            let entry = out.entry(key.clone()).or_default();
            if !v.is_empty() {
                entry.push(v.to_string());
            }
            current = Some(key);
        } else if let Some(key) = &current {
            out.entry(key.clone()).or_default().push(tok.to_string());
        }
    }
    out
}

fn parse_fortran_float(s: &str) -> Option<f64> {
    s.parse().ok().or_else(|| s.replace(['D', 'd'], "E").parse().ok())
}

#[cfg(test)]
mod tests {
    use super::*;

    const H2: &str = include_str!("../fixtures/h2_sto3g.fcidump");

    #[test]
    fn header_fields() {
        let t = IntegralTable::parse_fcidump("&FCI NORB=2,NELEC=2,MS2=0,\n&END\n").unwrap();
        assert_eq!(t.n_orbitals(), 2);
        assert_eq!(t.n_electrons(), 2);
        assert_eq!(t.ms2(), 0);
    }

    #[test]
    fn body_lines() {
        let t = IntegralTable::parse_fcidump(
            "&FCI NORB=2,NELEC=2,MS2=0,\n/\n0.70 0 0 0 0\n-1.25 1 1 0 0\n0.3 2 1 0 0\n0.18 2 1 2 1\n",
        )
        .unwrap();
        assert_eq!(t.core_energy(), 0.70);
        assert_eq!(t.one_body(0, 0), -1.25);
        assert_eq!(t.one_body(0, 1), 0.3);
        for (p, q, r, s) in [(1, 0, 1, 0), (0, 1, 1, 0), (1, 0, 0, 1), (0, 1, 0, 1)] {
            assert_eq!(t.two_body(p, q, r, s), 0.18);
        }
        assert_eq!(t.two_body(0, 0, 1, 1), 0.0);
    }

    #[test]
    fn multiline_header() {
        let t = IntegralTable::parse_fcidump(H2).unwrap();
        assert_eq!(t.n_orbitals(), 2);
        assert!((t.core_energy() - 0.7137539936876182).abs() < 1e-16);
        assert_eq!(t.two_body(1, 1, 0, 0), t.two_body(0, 0, 1, 1));
    }

    #[test]
    fn errors() {
        assert_eq!(
            IntegralTable::parse_fcidump("&FCI NELEC=2,\n&END\n"),
            Err(FcidumpError::MissingField("NORB"))
        );
        assert_eq!(
            IntegralTable::parse_fcidump("&FCI NORB=2,\n&END\n"),
            Err(FcidumpError::MissingField("NELEC"))
        );
        assert_eq!(
            IntegralTable::parse_fcidump("&FCI NORB=2,NELEC=2\n&END\n0.5 3 1 0 0\n"),
            Err(FcidumpError::IndexOutOfRange { line: 3, index: 3, norb: 2 })
        );
        assert!(matches!(
            IntegralTable::parse_fcidump("&FCI NORB=2,NELEC=2\n&END\n0.5 1 1 0 0\nabc 1 1 0 0\n"),
            Err(FcidumpError::Malformed { line: 4, .. })
        ));
        assert!(matches!(
            IntegralTable::parse_fcidump("&FCI NORB=1,NELEC=3\n&END\n"),
            Err(FcidumpError::TooManyElectrons(3, 1))
        ));
    }

    #[test]
    fn fortran_exponent() {
        let t = IntegralTable::parse_fcidump("&FCI NORB=1,NELEC=1\n&END\n-1.5D+00 1 1 0 0\n").unwrap();
        assert_eq!(t.one_body(0, 0), -1.5);
    }
}
