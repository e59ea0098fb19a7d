use super::{FitConfig, FitError, Interval, ParamValue, Result, Sharing};
use crate::model::PinningParams;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Slot {
    Free(usize),
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scale {
    Log,
    Linear,
}

/// Maps the solver's internal parameter vector onto per-dataset pinning
/// parameters. `ω₀` and `F` are carried as logarithms, `α` linearly.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamLayout {
    omega0: Vec<Slot>,
    alpha: Vec<Slot>,
    f: Vec<Slot>,
    names: Vec<String>,
    scales: Vec<Scale>,
    initial: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

struct SlotSpec<'a> {
    name: &'static str,
    sharing: Sharing,
    initial: &'a ParamValue,
    bounds: Interval,
    scale: Scale,
}

impl ParamLayout {
    pub fn new(cfg: &FitConfig, n_datasets: usize, omega_cavity: f64) -> Result<Self> {
        cfg.validate()?;
        if n_datasets == 0 {
            return Err(FitError::Config("no datasets".into()));
        }
        let omega_default = ParamValue::Scalar(omega_cavity);
        let specs = [
            SlotSpec {
                name: "omega0",
                sharing: cfg.share.omega0,
                initial: cfg.initial.omega0.as_ref().unwrap_or(&omega_default),
                bounds: cfg.bounds.omega0,
                scale: Scale::Log,
            },
            SlotSpec {
                name: "alpha",
                sharing: cfg.share.alpha,
                initial: &cfg.initial.alpha,
                bounds: cfg.bounds.alpha,
                scale: Scale::Linear,
            },
            SlotSpec {
                name: "f",
                sharing: cfg.share.f,
                initial: &cfg.initial.f,
                bounds: cfg.bounds.f,
                scale: Scale::Log,
            },
        ];

        let mut layout = Self {
            omega0: Vec::new(),
            alpha: Vec::new(),
            f: Vec::new(),
            names: Vec::new(),
            scales: Vec::new(),
            initial: Vec::new(),
            lower: Vec::new(),
            upper: Vec::new(),
        };
        let mut slots = Vec::with_capacity(3);
        for spec in &specs {
            slots.push(layout.add(spec, n_datasets)?);
        }
        let mut it = slots.into_iter();
        layout.omega0 = it.next().unwrap_or_default();
        layout.alpha = it.next().unwrap_or_default();
        layout.f = it.next().unwrap_or_default();
        Ok(layout)
    }

    fn add(&mut self, spec: &SlotSpec<'_>, n: usize) -> Result<Vec<Slot>> {
        let to_internal = |v: f64| match spec.scale {
            Scale::Log => v.ln(),
            Scale::Linear => v,
        };
        let check = |v: f64, label: &str| -> Result<()> {
            if !spec.bounds.contains(v) {
                return Err(FitError::Config(format!(
                    "initial {label} = {v} outside bounds [{}, {}]",
                    spec.bounds.0, spec.bounds.1
                )));
            }
            if spec.scale == Scale::Log && !(v > 0.0) {
                return Err(FitError::Config(format!("initial {label} = {v} must be positive")));
            }
            Ok(())
        };
        let push = |this: &mut Self, label: String, v: f64| -> Result<usize> {
            check(v, &label)?;
            this.names.push(label);
            this.scales.push(spec.scale);
            this.initial.push(to_internal(v));
            this.lower.push(to_internal(spec.bounds.0));
            this.upper.push(to_internal(spec.bounds.1));
            Ok(this.names.len() - 1)
        };
        match spec.sharing {
            Sharing::Global => {
                let v = match spec.initial {
                    ParamValue::Scalar(v) => *v,
                    ParamValue::PerDataset(_) => {
                        return Err(FitError::Config(format!(
                            "{} is global but has per-dataset initial values",
                            spec.name
                        )))
                    }
                };
                let idx = push(self, spec.name.to_string(), v)?;
                Ok(vec![Slot::Free(idx); n])
            }
            Sharing::PerDataset => (0..n)
                .map(|k| {
                    let v = spec.initial.for_dataset(k, n)?;
                    push(self, format!("{}[{k}]", spec.name), v).map(Slot::Free)
                })
                .collect(),
            Sharing::Fixed => (0..n)
                .map(|k| spec.initial.for_dataset(k, n).map(Slot::Fixed))
                .collect(),
        }
    }

    pub fn n_free(&self) -> usize {
        self.names.len()
    }

    pub fn n_datasets(&self) -> usize {
        self.f.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    fn resolve(&self, slot: Slot, x: &[f64]) -> f64 {
        match slot {
            Slot::Fixed(v) => v,
            Slot::Free(i) => match self.scales[i] {
                Scale::Log => x[i].exp(),
                Scale::Linear => x[i],
            },
        }
    }

    /// Pinning parameters of dataset `k` at internal point `x`.
    pub fn dataset_params(&self, x: &[f64], k: usize) -> PinningParams {
        PinningParams {
            omega0: self.resolve(self.omega0[k], x),
            alpha: self.resolve(self.alpha[k], x),
            f: self.resolve(self.f[k], x),
        }
    }

    /// Index of the free parameter each field of dataset `k` maps to.
    pub fn dataset_indices(&self, k: usize) -> [Option<usize>; 3] {
        let idx = |s: Slot| match s {
            Slot::Free(i) => Some(i),
            Slot::Fixed(_) => None,
        };
        [idx(self.omega0[k]), idx(self.alpha[k]), idx(self.f[k])]
    }

    pub fn to_linear(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.scales)
            .map(|(&v, s)| match s {
                Scale::Log => v.exp(),
                Scale::Linear => v,
            })
            .collect()
    }

    pub fn to_internal(&self, linear: &[f64]) -> Vec<f64> {
        linear
            .iter()
            .zip(&self.scales)
            .map(|(&v, s)| match s {
                Scale::Log => v.ln(),
                Scale::Linear => v,
            })
            .collect()
    }

    /// `d(linear)/d(internal)` for each free parameter.
    pub fn linear_derivative(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.scales)
            .map(|(&v, s)| match s {
                Scale::Log => v.exp(),
                Scale::Linear => 1.0,
            })
            .collect()
    }
}
