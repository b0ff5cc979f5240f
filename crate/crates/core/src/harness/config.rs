//! Flat `key = value` run configuration.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::synthetic::Task;
use super::HarnessError;
use crate::encoder::ModelConfig;

/// Settings shared by the commands; model shape lives in [`ModelConfig`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub task: Task,
    pub seed: Option<u64>,
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub eval_every: usize,
    pub eval_examples: usize,
    pub min_words: usize,
    pub max_words: usize,
    /// Fraction of heads corrupted before masks are built.
    pub degradation: f64,
    pub levels: Vec<f64>,
    /// Sweep seeds; defaults to five seeds counted up from the root seed.
    pub seeds: Option<Vec<u64>>,
    /// Trees to train on instead of generated ones.
    pub data: Option<PathBuf>,
    pub op_threshold: f64,
    pub model_threshold: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            task: Task::HeadPredict,
            seed: None,
            steps: 2000,
            batch_size: 8,
            learning_rate: 1e-3,
            eval_every: 200,
            eval_examples: 200,
            min_words: 2,
            max_words: 12,
            degradation: 0.0,
            levels: vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0],
            seeds: None,
            data: None,
            op_threshold: 1e-5,
            model_threshold: 1e-4,
        }
    }
}

fn parse_list<T: FromStr>(value: &str) -> Option<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().ok())
        .collect()
}

impl RunConfig {
    /// Sets one field; `Ok(false)` for keys this struct does not own.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool, String> {
        fn p<T: FromStr>(key: &str, value: &str) -> Result<T, String> {
            value.parse().map_err(|_| format!("bad value {value:?} for {key}"))
        }
        let list_err = || format!("bad list {value:?} for {key}");
        match key {
            "task" => self.task = p(key, value)?,
            "seed" => self.seed = Some(p(key, value)?),
            "steps" => self.steps = p(key, value)?,
            "batch_size" => self.batch_size = p(key, value)?,
            "learning_rate" => self.learning_rate = p(key, value)?,
            "eval_every" => self.eval_every = p(key, value)?,
            "eval_examples" => self.eval_examples = p(key, value)?,
            "min_words" => self.min_words = p(key, value)?,
            "max_words" => self.max_words = p(key, value)?,
            "degradation" => self.degradation = p(key, value)?,
            "levels" => self.levels = parse_list(value).ok_or_else(list_err)?,
            "seeds" => self.seeds = Some(parse_list(value).ok_or_else(list_err)?),
            "data" => self.data = Some(PathBuf::from(value)),
            "op_threshold" => self.op_threshold = p(key, value)?,
            "model_threshold" => self.model_threshold = p(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    pub fn root_seed(&self) -> Result<u64, HarnessError> {
        self.seed
            .ok_or_else(|| HarnessError::Config("a seed is required (--seed or `seed = ...`)".into()))
    }

    pub fn sweep_seeds(&self) -> Result<Vec<u64>, HarnessError> {
        match &self.seeds {
            Some(s) => Ok(s.clone()),
            None => {
                let root = self.root_seed()?;
                Ok((0..5).map(|k| root + k).collect())
            }
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        self.root_seed()?;
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if self.min_words == 0 || self.min_words > self.max_words {
            return bad(format!("bad size range {}..={}", self.min_words, self.max_words));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate {} must be positive", self.learning_rate));
        }
        if let Some(&l) = self
            .levels
            .iter()
            .chain(std::iter::once(&self.degradation))
            .find(|l| !(0.0..=1.0).contains(*l))
        {
            return bad(format!("degradation level {l} outside [0, 1]"));
        }
        if let Some(path) = &self.data {
            if !path.is_file() {
                return bad(format!("data file {} does not exist", path.display()));
            }
        }
        Ok(())
    }
}

/// Run and model settings read together from one file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    pub run: RunConfig,
    pub model: ModelConfig,
}

impl Settings {
    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<(), HarnessError> {
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = |message: String| HarnessError::ConfigLine {
                origin: origin.to_string(),
                line: k + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| at(format!("expected `key = value`, got {line:?}")))?;
            self.set(key.trim(), value.trim()).map_err(at)?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        if self.run.set(key, value)? {
            if key == "seed" {
                self.model.seed = self.run.seed.unwrap_or_default();
            }
            return Ok(());
        }
        match self.model.set(key, value) {
            Ok(true) => Ok(()),
            Ok(false) => Err(format!("unknown key {key:?}")),
            Err(e) => Err(e.to_string()),
        }
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut s = Settings::default();
        s.apply_text(&text, &path.display().to_string())?;
        Ok(s)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.run.seed = Some(seed);
        self.model.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.run.validate()?;
        self.model.validate()?;
        // [CLS] plus the words must fit
        if self.run.max_words + 1 > self.model.max_len {
            return Err(HarnessError::Config(format!(
                "max_words {} does not fit max_len {}",
                self.run.max_words, self.model.max_len
            )));
        }
        Ok(())
    }
}

impl fmt::Display for Settings {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = &self.run;
        writeln!(f, "task = {}", r.task)?;
        if let Some(s) = r.seed {
            writeln!(f, "seed = {s}")?;
        }
        writeln!(f, "steps = {}", r.steps)?;
        writeln!(f, "batch_size = {}", r.batch_size)?;
        writeln!(f, "learning_rate = {}", r.learning_rate)?;
        writeln!(f, "eval_every = {}", r.eval_every)?;
        writeln!(f, "eval_examples = {}", r.eval_examples)?;
        writeln!(f, "min_words = {}", r.min_words)?;
        writeln!(f, "max_words = {}", r.max_words)?;
        writeln!(f, "degradation = {}", r.degradation)?;
        let levels: Vec<String> = r.levels.iter().map(f64::to_string).collect();
        writeln!(f, "levels = {}", levels.join(","))?;
        if let Some(seeds) = &r.seeds {
            let s: Vec<String> = seeds.iter().map(u64::to_string).collect();
            writeln!(f, "seeds = {}", s.join(","))?;
        }
        if let Some(d) = &r.data {
            writeln!(f, "data = {}", d.display())?;
        }
        writeln!(f, "op_threshold = {}", r.op_threshold)?;
        writeln!(f, "model_threshold = {}", r.model_threshold)?;
        for (k, v) in self.model.to_map() {
            if k != "seed" {
                writeln!(f, "{k} = {v}")?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_mixed_keys_and_comments() {
        let mut s = Settings::default();
        s.apply_text("# toy\nseed = 9\nsteps=50 # short\n\nd_model = 16\nlevels = 0, 0.5,1\n", "t")
            .unwrap();
        assert_eq!(s.run.seed, Some(9));
        assert_eq!(s.model.seed, 9);
        assert_eq!(s.run.steps, 50);
        assert_eq!(s.model.d_model, 16);
        assert_eq!(s.run.levels, vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let mut s = Settings::default();
        let e = s.apply_text("seed = 1\nbogus = 3\n", "cfg.txt").unwrap_err();
        assert_eq!(e.to_string(), "cfg.txt:2: unknown key \"bogus\"");
        let e = s.apply_text("steps\n", "cfg.txt").unwrap_err();
        assert!(e.to_string().starts_with("cfg.txt:1:"));
    }

    #[test]
    fn seed_is_mandatory() {
        assert!(Settings::default().validate().is_err());
        assert!(Settings::default().with_seed(1).validate().is_ok());
    }

    #[test]
    fn display_round_trips() {
        let mut s = Settings::default().with_seed(4);
        s.run.seeds = Some(vec![1, 2]);
        s.model.alpha = 0.25;
        let mut back = Settings::default();
        back.apply_text(&s.to_string(), "x").unwrap();
        assert_eq!(back, s);
    }
}
