//! Text container of named real arrays with shape headers.
//!
//! ```text
//! pronk-checkpoint v1
//! <name> <rows> <cols>
//! <rows * cols whitespace-separated values>
//! ...
//! ```
//!
//! Values use the shortest representation that round-trips, so a save/load
//! cycle is bit-exact.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::mlp::Mlp;
use crate::policy::ActorCritic;
use crate::ppo::Adam;
use crate::TrainError;

pub const MAGIC: &str = "pronk-checkpoint v1";

#[derive(Debug, Clone, PartialEq)]
pub struct Array {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Checkpoint {
    pub arrays: BTreeMap<String, Array>,
}

fn bad(msg: impl Into<String>) -> TrainError {
    TrainError::Checkpoint(msg.into())
}

impl Checkpoint {
    pub fn insert(&mut self, name: &str, rows: usize, cols: usize, data: Vec<f64>) {
        assert_eq!(rows * cols, data.len());
        assert!(!name.is_empty() && !name.contains(char::is_whitespace));
        self.arrays.insert(name.to_string(), Array { rows, cols, data });
    }

    pub fn insert_vec(&mut self, name: &str, data: Vec<f64>) {
        self.insert(name, 1, data.len(), data);
    }

    pub fn insert_scalar(&mut self, name: &str, v: f64) {
        self.insert(name, 1, 1, vec![v]);
    }

    pub fn get(&self, name: &str) -> Result<&[f64], TrainError> {
        self.arrays
            .get(name)
            .map(|a| a.data.as_slice())
            .ok_or_else(|| bad(format!("missing array `{name}`")))
    }

    pub fn scalar(&self, name: &str) -> Result<f64, TrainError> {
        match self.get(name)? {
            [v] => Ok(*v),
            _ => Err(bad(format!("array `{name}` is not a scalar"))),
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(MAGIC);
        s.push('\n');
        for (name, a) in &self.arrays {
            let _ = writeln!(s, "{name} {} {}", a.rows, a.cols);
            let mut first = true;
            for v in &a.data {
                if !first {
                    s.push(' ');
                }
                first = false;
                let _ = write!(s, "{v:?}");
            }
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self, TrainError> {
        let mut lines = text.lines();
        if lines.next() != Some(MAGIC) {
            return Err(bad("unrecognized header"));
        }
        let mut out = Checkpoint::default();
        while let Some(header) = lines.next() {
            if header.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = header.split_whitespace().collect();
            let [name, rows, cols] = parts[..] else {
                return Err(bad(format!("malformed array header `{header}`")));
            };
            let rows: usize = rows.parse().map_err(|_| bad("bad row count"))?;
            let cols: usize = cols.parse().map_err(|_| bad("bad column count"))?;
            let body = lines.next().ok_or_else(|| bad(format!("missing data for `{name}`")))?;
            let data = body
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| bad(format!("array `{name}`: {e}")))?;
            if data.len() != rows * cols {
                return Err(bad(format!("array `{name}` has {} values, expected {}", data.len(), rows * cols)));
            }
            out.arrays.insert(name.to_string(), Array { rows, cols, data });
        }
        Ok(out)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), TrainError> {
        let path = path.as_ref();
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, self.to_text())?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TrainError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn put_policy(&mut self, p: &ActorCritic) {
        for (name, net) in [("actor", &p.actor), ("critic", &p.critic)] {
            self.insert_vec(&format!("{name}.sizes"), net.sizes().iter().map(|&s| s as f64).collect());
            self.insert_vec(&format!("{name}.params"), net.params().to_vec());
        }
        self.insert_vec("log_std", p.log_std.clone());
    }

    pub fn policy(&self) -> Result<ActorCritic, TrainError> {
        let net = |name: &str| -> Result<Mlp, TrainError> {
            let sizes: Vec<usize> = self
                .get(&format!("{name}.sizes"))?
                .iter()
                .map(|&s| s as usize)
                .collect();
            Mlp::from_params(&sizes, self.get(&format!("{name}.params"))?.to_vec())
                .ok_or_else(|| bad(format!("{name} parameter count does not match its sizes")))
        };
        let actor = net("actor")?;
        let critic = net("critic")?;
        let log_std = self.get("log_std")?.to_vec();
        if log_std.len() != actor.output_dim() || critic.output_dim() != 1 || critic.input_dim() != actor.input_dim() {
            return Err(bad("inconsistent policy dimensions"));
        }
        Ok(ActorCritic { actor, critic, log_std })
    }

    pub fn put_adam(&mut self, a: &Adam) {
        self.insert_vec("adam.m", a.m.clone());
        self.insert_vec("adam.v", a.v.clone());
        self.insert_scalar("adam.t", a.t as f64);
    }

    pub fn adam(&self, n: usize) -> Result<Adam, TrainError> {
        let mut a = Adam::new(n);
        a.m = self.get("adam.m")?.to_vec();
        a.v = self.get("adam.v")?.to_vec();
        a.t = self.scalar("adam.t")? as u64;
        if a.m.len() != n || a.v.len() != n {
            return Err(bad("optimizer state does not match the policy"));
        }
        Ok(a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::PolicyConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut c = Checkpoint::default();
        c.insert("w", 2, 2, vec![0.1, -1e-300, f64::MAX, 1.0 / 3.0]);
        c.insert_scalar("it", 42.0);
        let back = Checkpoint::parse(&c.to_text()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn policy_round_trip_gives_identical_outputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg = PolicyConfig {
            hidden: vec![16, 8],
            ..PolicyConfig::default()
        };
        let p = ActorCritic::new(&cfg, &mut rng);
        let mut c = Checkpoint::default();
        c.put_policy(&p);
        let q = Checkpoint::parse(&c.to_text()).unwrap().policy().unwrap();
        let s = [0.3, -0.2, 0.1, 0.05, 0.0, 0.7];
        assert_eq!(p.forward(&s), q.forward(&s));
    }

    #[test]
    fn rejects_malformed_files() {
        assert!(Checkpoint::parse("nope\n").is_err());
        assert!(Checkpoint::parse(&format!("{MAGIC}\nw 1 2\n0.5\n")).is_err());
        assert!(Checkpoint::parse(&format!("{MAGIC}\nw 1 1\nabc\n")).is_err());
        assert!(Checkpoint::default().policy().is_err());
    }
}
