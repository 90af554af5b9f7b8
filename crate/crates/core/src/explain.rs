//! Explanation pool and the biasing configuration space.
//!
//! A configuration assigns every pool entry a `(shown, emphasized)` pair.
//! DynEmph keeps everything shown and toggles emphasis; X-Selector toggles
//! visibility under a budget and never emphasizes.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecast::{ForecastClass, ForecastDistribution};

/// A natural-language explanation supporting one forecast class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Explanation {
    pub id: String,
    pub label: ForecastClass,
    pub text: String,
}

/// Pool entry as stored on disk: `{id, label, template}`.
///
/// Templates may use `{prob}` (forecast probability of the label as an
/// integer percent), `{ret5}` (trailing five-day return, signed percent with
/// one decimal) and `{price}` (today's open, rounded).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolEntry {
    pub id: String,
    pub label: ForecastClass,
    pub template: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<PoolEntry>", into = "Vec<PoolEntry>")]
pub struct ExplanationPool {
    entries: Vec<PoolEntry>,
}

impl TryFrom<Vec<PoolEntry>> for ExplanationPool {
    type Error = Error;
    fn try_from(entries: Vec<PoolEntry>) -> Result<Self> {
        ExplanationPool::new(entries)
    }
}

impl From<ExplanationPool> for Vec<PoolEntry> {
    fn from(p: ExplanationPool) -> Self {
        p.entries
    }
}

impl Default for ExplanationPool {
    fn default() -> Self {
        let entries = ForecastClass::ALL
            .iter()
            .map(|&label| PoolEntry { id: label.as_str().to_string(), label, template: default_template(label).into() })
            .collect();
        Self::new(entries).expect("default pool")
    }
}

fn default_template(label: ForecastClass) -> &'static str {
    match label {
        ForecastClass::Bullish => {
            "The model puts a {prob} chance on a rise of more than 2%. The price moved {ret5} over the last five days \
             and buying pressure at the {price} open suggests further upside."
        }
        ForecastClass::Neutral => {
            "The model puts a {prob} chance on the price staying within 2% of the {price} open. The {ret5} move over \
             the last five days points to a range-bound session."
        }
        ForecastClass::Bearish => {
            "The model puts a {prob} chance on a fall of more than 2%. After a {ret5} move over the last five days, \
             selling pressure below the {price} open suggests further downside."
        }
    }
}

impl ExplanationPool {
    pub fn new(mut entries: Vec<PoolEntry>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for e in &entries {
            if !seen.insert(e.id.clone()) {
                return Err(Error::Configuration(format!("duplicate explanation id `{}`", e.id)));
            }
        }
        entries.sort_by(|a, b| a.id.cmp(&b.id));
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Entries in canonical (id) order.
    pub fn entries(&self) -> &[PoolEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&PoolEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    /// Fills every template for today's forecast and prices.
    pub fn generate(&self, generator: &dyn ExplanationGenerator, forecast: &ForecastDistribution, ctx: &PriceContext) -> Vec<Explanation> {
        self.entries.iter().map(|e| generator.generate(e, forecast, ctx)).collect()
    }
}

/// Price figures available to explanation templates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceContext {
    pub open: f64,
    pub trailing_return_5d: f64,
}

/// Source of explanation text. The template filler is the built-in
/// implementation; LLM-backed generators plug in behind the same trait.
pub trait ExplanationGenerator {
    fn generate(&self, entry: &PoolEntry, forecast: &ForecastDistribution, ctx: &PriceContext) -> Explanation;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct TemplateGenerator;

impl ExplanationGenerator for TemplateGenerator {
    fn generate(&self, entry: &PoolEntry, forecast: &ForecastDistribution, ctx: &PriceContext) -> Explanation {
        Explanation { id: entry.id.clone(), label: entry.label, text: fill_template(&entry.template, entry.label, forecast, ctx) }
    }
}

/// Integer percent, rounded half-up.
pub fn percent_half_up(p: f64) -> i64 {
    (p * 100.0 + 0.5).floor() as i64
}

fn fill_template(template: &str, label: ForecastClass, forecast: &ForecastDistribution, ctx: &PriceContext) -> String {
    let ret = ctx.trailing_return_5d * 100.0;
    template
        .replace("{prob}", &format!("{}%", percent_half_up(forecast.prob(label))))
        .replace("{ret5}", &format!("{ret:+.1}%"))
        .replace("{price}", &format!("{:.0}", ctx.open))
}

/// Explanation for `label` from the built-in template.
pub fn template_generate(label: ForecastClass, forecast: &ForecastDistribution, ctx: &PriceContext) -> Explanation {
    let entry = PoolEntry { id: label.as_str().into(), label, template: default_template(label).into() };
    TemplateGenerator.generate(&entry, forecast, ctx)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode")]
pub enum BiasingMode {
    #[serde(rename = "dynemph")]
    DynEmph,
    #[serde(rename = "xselector")]
    XSelector { budget: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ConfigEntry {
    pub id: String,
    pub shown: bool,
    pub emphasized: bool,
}

/// The biasing decision: one entry per pool explanation, ordered by id.
///
/// The derived ordering compares entries in id order and, since every
/// configuration of a pool carries the same ids, amounts to lexicographic
/// order over the `(shown, emphasized)` flags with `false < true`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ExplanationConfig {
    pub entries: Vec<ConfigEntry>,
}

impl ExplanationConfig {
    /// Sorts by id and enforces `emphasized => shown`.
    pub fn canonical(mut entries: Vec<ConfigEntry>) -> Self {
        for e in &mut entries {
            if e.emphasized {
                e.shown = true;
            }
        }
        entries.sort_by(|a, b| a.id.cmp(&b.id));
        Self { entries }
    }

    /// Everything shown, nothing emphasized.
    pub fn plain(pool: &ExplanationPool) -> Self {
        Self::canonical(pool.entries().iter().map(|e| ConfigEntry { id: e.id.clone(), shown: true, emphasized: false }).collect())
    }

    /// Nothing shown.
    pub fn hidden(pool: &ExplanationPool) -> Self {
        Self::canonical(pool.entries().iter().map(|e| ConfigEntry { id: e.id.clone(), shown: false, emphasized: false }).collect())
    }

    pub fn is_canonical(&self) -> bool {
        self.entries.windows(2).all(|w| w[0].id < w[1].id) && self.entries.iter().all(|e| e.shown || !e.emphasized)
    }

    pub fn entry(&self, id: &str) -> Option<&ConfigEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    pub fn shown_count(&self) -> usize {
        self.entries.iter().filter(|e| e.shown).count()
    }

    /// Compact flag string, e.g. `SE|S-|--` (shown/emphasized per entry).
    pub fn flags(&self) -> String {
        self.entries
            .iter()
            .map(|e| format!("{}{}", if e.shown { 'S' } else { '-' }, if e.emphasized { 'E' } else { '-' }))
            .collect::<Vec<_>>()
            .join("|")
    }
}

/// All configurations reachable in `mode`, in canonical order.
pub fn enumerate_configs(pool: &ExplanationPool, mode: BiasingMode) -> Result<Vec<ExplanationConfig>> {
    let ids: Vec<&str> = pool.entries().iter().map(|e| e.id.as_str()).collect();
    let n = ids.len();
    let mut configs = match mode {
        BiasingMode::DynEmph => {
            for label in ForecastClass::ALL {
                let count = pool.entries().iter().filter(|e| e.label == label).count();
                if count != 1 {
                    return Err(Error::Configuration(format!(
                        "DynEmph needs exactly one explanation per label; `{label}` has {count}"
                    )));
                }
            }
            if n >= 31 {
                return Err(Error::Configuration(format!("pool of {n} explanations is too large to enumerate")));
            }
            (0u32..1 << n)
                .map(|mask| {
                    ExplanationConfig::canonical(
                        ids.iter()
                            .enumerate()
                            .map(|(i, id)| ConfigEntry { id: id.to_string(), shown: true, emphasized: mask >> i & 1 == 1 })
                            .collect(),
                    )
                })
                .collect::<Vec<_>>()
        }
        BiasingMode::XSelector { budget } => {
            if n >= 31 {
                return Err(Error::Configuration(format!("pool of {n} explanations is too large to enumerate")));
            }
            (0u32..1 << n)
                .filter(|mask| mask.count_ones() as usize <= budget)
                .map(|mask| {
                    ExplanationConfig::canonical(
                        ids.iter()
                            .enumerate()
                            .map(|(i, id)| ConfigEntry { id: id.to_string(), shown: mask >> i & 1 == 1, emphasized: false })
                            .collect(),
                    )
                })
                .collect()
        }
    };
    configs.sort();
    Ok(configs)
}

/// One displayed explanation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisplayItem {
    pub id: String,
    pub label: ForecastClass,
    pub text: String,
    pub emphasized: bool,
}

/// Shown explanations in display order (bullish, neutral, bearish, then id).
pub fn render(explanations: &[Explanation], config: &ExplanationConfig) -> Result<Vec<DisplayItem>> {
    for e in &config.entries {
        if !explanations.iter().any(|x| x.id == e.id) {
            return Err(Error::Reference(e.id.clone()));
        }
    }
    let mut items: Vec<DisplayItem> = config
        .entries
        .iter()
        .filter(|e| e.shown)
        .map(|e| {
            let x = explanations.iter().find(|x| x.id == e.id).expect("checked above");
            DisplayItem { id: x.id.clone(), label: x.label, text: x.text.clone(), emphasized: e.emphasized }
        })
        .collect();
    items.sort_by(|a, b| (a.label, &a.id).cmp(&(b.label, &b.id)));
    Ok(items)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> PriceContext {
        PriceContext { open: 1012.4, trailing_return_5d: 0.0234 }
    }

    fn texts(pool: &ExplanationPool) -> Vec<Explanation> {
        pool.generate(&TemplateGenerator, &ForecastDistribution::mixture(ForecastClass::Bullish, 0.7), &ctx())
    }

    fn binom(n: u64, k: u64) -> u64 {
        (1..=k).fold(1, |acc, i| acc * (n + 1 - i) / i)
    }

    fn pool_of(n: usize) -> ExplanationPool {
        ExplanationPool::new(
            (0..n)
                .map(|i| PoolEntry { id: format!("x{i}"), label: ForecastClass::ALL[i % 3], template: "t".into() })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn dynemph_has_eight_configs() {
        let configs = enumerate_configs(&ExplanationPool::default(), BiasingMode::DynEmph).unwrap();
        assert_eq!(configs.len(), 8);
        assert!(configs.iter().all(|c| c.shown_count() == 3));
        assert_eq!(configs[0], ExplanationConfig::plain(&ExplanationPool::default()));
    }

    #[test]
    fn xselector_counts() {
        let empty = ExplanationPool::new(vec![]).unwrap();
        let c = enumerate_configs(&empty, BiasingMode::XSelector { budget: 2 }).unwrap();
        assert_eq!(c.len(), 1);
        assert!(c[0].entries.is_empty());
        let c = enumerate_configs(&pool_of(4), BiasingMode::XSelector { budget: 2 }).unwrap();
        assert_eq!(c.len(), 1 + 4 + 6);
        for n in 0..7u64 {
            for b in 0..=n + 1 {
                let want: u64 = (0..=b.min(n)).map(|k| binom(n, k)).sum();
                let got = enumerate_configs(&pool_of(n as usize), BiasingMode::XSelector { budget: b as usize }).unwrap();
                assert_eq!(got.len() as u64, want);
            }
        }
    }

    #[test]
    fn dynemph_needs_label_coverage() {
        let pool = ExplanationPool::new(vec![PoolEntry { id: "a".into(), label: ForecastClass::Bullish, template: "".into() }]).unwrap();
        assert!(matches!(enumerate_configs(&pool, BiasingMode::DynEmph), Err(Error::Configuration(_))));
        assert!(matches!(enumerate_configs(&pool_of(6), BiasingMode::DynEmph), Err(Error::Configuration(_))));
    }

    #[test]
    fn canonical_order_is_strict() {
        for mode in [BiasingMode::DynEmph, BiasingMode::XSelector { budget: 3 }] {
            let c = enumerate_configs(&ExplanationPool::default(), mode).unwrap();
            assert!(c.windows(2).all(|w| w[0] < w[1]));
            assert!(c.iter().all(ExplanationConfig::is_canonical));
        }
    }

    #[test]
    fn render_plain_and_emphasis() {
        let pool = ExplanationPool::default();
        let xs = texts(&pool);
        let items = render(&xs, &ExplanationConfig::plain(&pool)).unwrap();
        assert_eq!(items.len(), 3);
        assert_eq!(items.iter().map(|i| i.label).collect::<Vec<_>>(), ForecastClass::ALL.to_vec());
        assert!(items.iter().all(|i| !i.emphasized));

        let mut cfg = ExplanationConfig::plain(&pool);
        cfg.entries.iter_mut().find(|e| e.id == "bullish").unwrap().emphasized = true;
        let items = render(&xs, &cfg).unwrap();
        assert!(items[0].emphasized && !items[1].emphasized && !items[2].emphasized);

        assert!(render(&xs, &ExplanationConfig::hidden(&pool)).unwrap().is_empty());
    }

    #[test]
    fn render_unknown_id() {
        let pool = ExplanationPool::default();
        let cfg = ExplanationConfig::canonical(vec![ConfigEntry { id: "nope".into(), shown: true, emphasized: false }]);
        assert!(matches!(render(&texts(&pool), &cfg), Err(Error::Reference(_))));
    }

    #[test]
    fn template_examples() {
        let up = template_generate(ForecastClass::Bullish, &ForecastDistribution::new(0.8, 0.1, 0.1).unwrap(), &ctx());
        assert!(up.text.contains("80%"));
        assert!(up.text.contains("rise"));
        assert_eq!(up, template_generate(ForecastClass::Bullish, &ForecastDistribution::new(0.8, 0.1, 0.1).unwrap(), &ctx()));
        let flat = template_generate(ForecastClass::Neutral, &ForecastDistribution::uniform(), &ctx());
        assert!(flat.text.contains("33%"));
        assert_eq!(percent_half_up(0.125), 13);
        assert_eq!(percent_half_up(0.124), 12);
        assert_eq!(percent_half_up(2.0 / 3.0), 67);
    }

    #[test]
    fn pool_json_round_trip_and_duplicates() {
        let pool = ExplanationPool::default();
        let text = serde_json::to_string(&pool).unwrap();
        assert_eq!(serde_json::from_str::<ExplanationPool>(&text).unwrap(), pool);
        let dup = r#"[{"id":"a","label":"bullish","template":"x"},{"id":"a","label":"neutral","template":"y"}]"#;
        assert!(serde_json::from_str::<ExplanationPool>(dup).is_err());
    }

    proptest::proptest! {
        #[test]
        fn rendered_items_are_never_hidden_yet_emphasized(budget in 0usize..4, dyn_mode: bool) {
            let pool = ExplanationPool::default();
            let mode = if dyn_mode { BiasingMode::DynEmph } else { BiasingMode::XSelector { budget } };
            let xs = texts(&pool);
            for cfg in enumerate_configs(&pool, mode).unwrap() {
                let items = render(&xs, &cfg).unwrap();
                proptest::prop_assert_eq!(items.len(), cfg.shown_count());
                for it in items {
                    proptest::prop_assert!(cfg.entry(&it.id).unwrap().shown);
                }
            }
        }
    }
}
