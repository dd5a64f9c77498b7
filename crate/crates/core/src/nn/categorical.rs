//! Softmax distribution over the classes a mask leaves open.

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct MaskedCategorical<T> {
    probs: Vec<T>,
    /// `-inf` for masked classes.
    log_probs: Vec<T>,
    mask: Vec<bool>,
}

impl<T: Scalar> MaskedCategorical<T> {
    pub fn new(logits: &[T], mask: &[bool]) -> Result<Self> {
        if logits.len() != mask.len() {
            return Err(Error::Shape {
                context: "categorical mask",
                expected: logits.len(),
                got: mask.len(),
            });
        }
        let max = logits
            .iter()
            .zip(mask)
            .filter(|&(_, &m)| m)
            .map(|(&z, _)| z)
            .fold(None, |acc: Option<T>, z| Some(acc.map_or(z, |a| a.max(z))))
            .ok_or_else(|| Error::Contract("every class is masked".into()))?;
        if !max.is_finite() {
            return Err(Error::NonFinite("categorical logits".into()));
        }
        let shifted: Vec<T> = logits.iter().map(|&z| z - max).collect();
        let total: T = shifted
            .iter()
            .zip(mask)
            .filter(|&(_, &m)| m)
            .map(|(&z, _)| z.exp())
            .sum();
        let log_total = total.ln();
        let mut log_probs = Vec::with_capacity(logits.len());
        let mut probs = Vec::with_capacity(logits.len());
        for (&z, &m) in shifted.iter().zip(mask) {
            if m {
                log_probs.push(z - log_total);
                probs.push(z.exp() / total);
            } else {
                log_probs.push(T::neg_infinity());
                probs.push(T::zero());
            }
        }
        Ok(Self {
            probs,
            log_probs,
            mask: mask.to_vec(),
        })
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn classes(&self) -> usize {
        self.probs.len()
    }

    /// Inverse-CDF draw restricted to open classes.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u = T::lit(rng.random::<f64>());
        let mut acc = T::zero();
        let mut last = 0;
        for (i, (&p, &m)) in self.probs.iter().zip(&self.mask).enumerate() {
            if !m {
                continue;
            }
            acc = acc + p;
            last = i;
            if u < acc {
                return i;
            }
        }
        // rounding left u above the accumulated mass
        last
    }

    pub fn log_prob(&self, class: usize) -> Result<T> {
        match self.mask.get(class) {
            Some(true) => Ok(self.log_probs[class]),
            Some(false) => Err(Error::Contract(format!("class {class} is masked"))),
            None => Err(Error::Contract(format!(
                "class {class} out of range for {} classes",
                self.classes()
            ))),
        }
    }

    pub fn entropy(&self) -> T {
        let h: T = self
            .probs
            .iter()
            .zip(&self.log_probs)
            .zip(&self.mask)
            .filter(|&(_, &m)| m)
            .map(|((&p, &lp), _)| -p * lp)
            .sum();
        h.max(T::zero())
    }

    /// Most probable open class; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = None;
        for (i, (&p, &m)) in self.probs.iter().zip(&self.mask).enumerate() {
            if m && best.is_none_or(|(_, bp)| p > bp) {
                best = Some((i, p));
            }
        }
        best.expect("at least one open class").0
    }

    /// `d log p(class) / d logits`; zero on masked classes.
    pub fn grad_log_prob(&self, class: usize) -> Result<Vec<T>> {
        self.log_prob(class)?;
        Ok(self
            .probs
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                let hot = if i == class { T::one() } else { T::zero() };
                if self.mask[i] { hot - p } else { T::zero() }
            })
            .collect())
    }

    /// `d entropy / d logits`; zero on masked classes.
    pub fn grad_entropy(&self) -> Vec<T> {
        let h = self.entropy();
        self.probs
            .iter()
            .zip(&self.log_probs)
            .zip(&self.mask)
            .map(|((&p, &lp), &m)| if m { -p * (lp + h) } else { T::zero() })
            .collect()
    }
}
