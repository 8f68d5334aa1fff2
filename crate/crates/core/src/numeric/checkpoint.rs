//! Text checkpoint container.
//!
//! ```text
//! GAZEKEX-CKPT-1
//! seed <u64>
//! config <one-line JSON>
//! tensors <count>
//! tensor <name> <d1> [<d2> ...]
//! <row-major values, space separated>
//! ...
//! end
//! ```
//!
//! Values are written with Rust's shortest round-trip float formatting, so a
//! write/read cycle is bit-exact.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::tape::ParamSet;
use super::tensor::Tensor;

pub const MAGIC: &str = "GAZEKEX-CKPT-1";

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub seed: u64,
    pub config: String,
    pub params: ParamSet,
}

impl Checkpoint {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{MAGIC}").unwrap();
        writeln!(out, "seed {}", self.seed).unwrap();
        writeln!(out, "config {}", self.config.replace('\n', " ")).unwrap();
        writeln!(out, "tensors {}", self.params.len()).unwrap();
        for (_, name, t) in self.params.iter() {
            let dims: Vec<String> = t.shape().iter().map(|d| d.to_string()).collect();
            writeln!(out, "tensor {name} {}", dims.join(" ")).unwrap();
            let vals: Vec<String> = t.data().iter().map(|v| format!("{v:?}")).collect();
            writeln!(out, "{}", vals.join(" ")).unwrap();
        }
        out.push_str("end\n");
        out
    }

    pub fn from_text(text: &str, origin: &Path) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| Error::parse(origin, 0, format!("unexpected end, wanted {what}")))
        };
        let (n, magic) = next("magic header")?;
        if magic.trim() != MAGIC {
            return Err(Error::parse(origin, n, format!("bad magic {magic:?}")));
        }
        let (n, seed_line) = next("seed")?;
        let seed = seed_line
            .strip_prefix("seed ")
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::parse(origin, n, "expected `seed <u64>`"))?;
        let (n, config_line) = next("config")?;
        let config = config_line
            .strip_prefix("config ")
            .or_else(|| (config_line == "config").then_some(""))
            .ok_or_else(|| Error::parse(origin, n, "expected `config <json>`"))?
            .to_string();
        let (n, count_line) = next("tensor count")?;
        let count: usize = count_line
            .strip_prefix("tensors ")
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::parse(origin, n, "expected `tensors <count>`"))?;
        let mut params = ParamSet::new();
        for _ in 0..count {
            let (n, header) = next("tensor header")?;
            let mut parts = header.split_whitespace();
            if parts.next() != Some("tensor") {
                return Err(Error::parse(origin, n, "expected `tensor <name> <dims>`"));
            }
            let name = parts
                .next()
                .ok_or_else(|| Error::parse(origin, n, "tensor without a name"))?;
            let shape = parts
                .map(|d| d.parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::parse(origin, n, format!("bad dimension: {e}")))?;
            let (n, values) = next("tensor values")?;
            let data = values
                .split_whitespace()
                .map(|v| v.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::parse(origin, n, format!("bad value: {e}")))?;
            let t = Tensor::new(shape, data).map_err(|e| Error::parse(origin, n, e.to_string()))?;
            if params.id(name).is_some() {
                return Err(Error::parse(origin, n, format!("duplicate tensor {name}")));
            }
            params.insert(name, t);
        }
        let (n, end) = next("end marker")?;
        if end.trim() != "end" {
            return Err(Error::parse(origin, n, "expected `end`"));
        }
        Ok(Checkpoint {
            seed,
            config,
            params,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::error::write_text(path, &self.to_text())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Checkpoint::from_text(&text, path)
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    proptest! {
        #[test]
        fn text_round_trip_is_bit_exact(
            values in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO, 1..40),
            seed in any::<u64>(),
        ) {
            let mut params = ParamSet::new();
            params.insert("a.weight", Tensor::vector(values.clone()));
            params.insert("b", Tensor::matrix(1, values.len(), values).unwrap());
            let ck = Checkpoint { seed, config: "{\"k\":1}".into(), params };
            let back = Checkpoint::from_text(&ck.to_text(), Path::new("mem")).unwrap();
            prop_assert_eq!(back, ck);
        }
    }

    #[test]
    fn wrong_magic_is_rejected() {
        let err = Checkpoint::from_text("NOPE\n", Path::new("x")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn truncated_file_is_rejected() {
        let ck = Checkpoint {
            seed: 3,
            config: String::new(),
            params: {
                let mut p = ParamSet::new();
                p.insert("w", Tensor::vector(vec![1.0, 2.0]));
                p
            },
        };
        let text = ck.to_text();
        let cut = &text[..text.len() - 4];
        assert!(Checkpoint::from_text(cut, Path::new("x")).is_err());
    }
}
