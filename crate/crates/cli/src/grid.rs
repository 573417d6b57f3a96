use std::str::FromStr;

/// Evenly spaced evaluation points, written `lo:hi:steps` on the command line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
}

impl Grid {
    pub fn points(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.lo];
        }
        let h = (self.hi - self.lo) / (self.steps - 1) as f64;
        // Pin the last point so `hi` is hit exactly.
        (0..self.steps)
            .map(|i| {
                if i + 1 == self.steps {
                    self.hi
                } else {
                    self.lo + h * i as f64
                }
            })
            .collect()
    }
}

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [lo, hi, steps] = parts.as_slice() else {
            return Err(format!("grid `{s}` must look like lo:hi:steps"));
        };
        let num = |v: &str| v.trim().parse::<f64>().ok().filter(|x| x.is_finite());
        let (Some(lo), Some(hi)) = (num(lo), num(hi)) else {
            return Err(format!("grid `{s}`: bounds must be finite numbers"));
        };
        let steps: usize = steps
            .trim()
            .parse()
            .ok()
            .filter(|n| *n >= 1)
            .ok_or_else(|| format!("grid `{s}`: steps must be a positive integer"))?;
        if lo > hi {
            return Err(format!("grid `{s}`: lo exceeds hi"));
        }
        Ok(Grid { lo, hi, steps })
    }
}
