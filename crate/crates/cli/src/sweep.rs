use std::fmt;

/// Invalid command-line usage; reported with exit status 2.
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
}

impl Sweep {
    /// Parses `NAME LO..HI steps K`.
    pub fn parse(args: &[String]) -> Result<Self, Usage> {
        let [name, range, keyword, steps] = args else {
            return Err(Usage("--sweep expects NAME LO..HI steps K".into()));
        };
        if keyword != "steps" {
            return Err(Usage(format!("--sweep expects the word `steps` before the count, got `{keyword}`")));
        }
        let (lo, hi) = range
            .split_once("..")
            .ok_or_else(|| Usage(format!("sweep range must look like LO..HI, got `{range}`")))?;
        let number = |s: &str| {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Usage(format!("sweep bound `{s}` is not a finite number")))
        };
        let (lo, hi) = (number(lo)?, number(hi)?);
        if !(hi > lo) {
            return Err(Usage(format!("sweep range {lo}..{hi} is empty; need LO < HI")));
        }
        let steps: usize = steps
            .parse()
            .map_err(|_| Usage(format!("sweep step count `{steps}` is not a positive integer")))?;
        if steps < 2 {
            return Err(Usage("sweep needs at least 2 steps".into()));
        }
        Ok(Self {
            name: name.clone(),
            lo,
            hi,
            steps,
        })
    }

    /// Evenly spaced values from `lo` to `hi` inclusive.
    pub fn values(&self) -> Vec<f64> {
        let span = self.hi - self.lo;
        let last = (self.steps - 1) as f64;
        (0..self.steps)
            .map(|i| if i + 1 == self.steps { self.hi } else { self.lo + span * i as f64 / last })
            .collect()
    }

    pub fn require(&self, known: &[(&str, &str)]) -> Result<String, Usage> {
        match known.iter().find(|(n, _)| *n == self.name) {
            Some((name, unit)) => Ok(if unit.is_empty() { name.to_string() } else { format!("{name}_{unit}") }),
            None => Err(Usage(format!(
                "unknown sweep parameter `{}`; expected one of: {}",
                self.name,
                known.iter().map(|(n, _)| *n).collect::<Vec<_>>().join(", ")
            ))),
        }
    }
}
