//! Category histograms normalized to probability mass functions.
//!
//! A single [`Profile`] type carries user, item and population profiles as
//! well as the forgery distributions mixed into them.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::evaluation::{Side, SplitAssignment};
use crate::folksonomy::{CategorySet, Folksonomy};

/// Largest deviation of a component sum from 1 that is silently renormalized.
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct Profile {
    components: Vec<f64>,
    categories: Arc<CategorySet>,
}

impl PartialEq for Profile {
    fn eq(&self, other: &Self) -> bool {
        self.same_categories(other) && self.components == other.components
    }
}

impl Profile {
    /// Wraps components that already form a PMF (sum within
    /// [`SIMPLEX_TOLERANCE`] of one).
    pub fn new(categories: Arc<CategorySet>, components: Vec<f64>) -> Result<Self> {
        check_components(&categories, &components)?;
        let sum: f64 = components.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::Validation(format!("profile components sum to {}, not 1", sum)));
        }
        let components = if sum == 1.0 {
            components
        } else {
            components.iter().map(|c| c / sum).collect()
        };
        Ok(Self { components, categories })
    }

    /// Normalizes arbitrary non-negative weights.
    pub fn from_weights(categories: Arc<CategorySet>, weights: &[f64]) -> Result<Self> {
        check_components(&categories, weights)?;
        let sum: f64 = weights.iter().sum();
        if sum <= 0.0 {
            return Err(Error::Validation("all weights are zero".into()));
        }
        Ok(Self {
            components: weights.iter().map(|w| w / sum).collect(),
            categories,
        })
    }

    pub fn from_counts(categories: Arc<CategorySet>, counts: &[u64]) -> Result<Self> {
        if counts.len() != categories.len() {
            return Err(Error::Validation(format!(
                "expected {} counts, got {}",
                categories.len(),
                counts.len()
            )));
        }
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(Error::UndefinedProfile("no annotations to count".into()));
        }
        Ok(Self {
            components: counts.iter().map(|&c| c as f64 / total as f64).collect(),
            categories,
        })
    }

    pub fn uniform(categories: Arc<CategorySet>) -> Self {
        let n = categories.len();
        Self {
            components: vec![1.0 / n as f64; n],
            categories,
        }
    }

    pub fn components(&self) -> &[f64] {
        &self.components
    }

    pub fn categories(&self) -> &Arc<CategorySet> {
        &self.categories
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn same_categories(&self, other: &Profile) -> bool {
        Arc::ptr_eq(&self.categories, &other.categories) || self.categories == other.categories
    }

    pub(crate) fn ensure_compatible(&self, other: &Profile) -> Result<()> {
        if self.same_categories(other) {
            Ok(())
        } else {
            Err(Error::CategoryMismatch)
        }
    }

    /// The convex combination `(1 - rho) * self + rho * other`.
    pub fn mix(&self, other: &Profile, rho: f64) -> Result<Profile> {
        self.ensure_compatible(other)?;
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::Config(format!("mixing weight {} outside [0, 1]", rho)));
        }
        let keep = 1.0 - rho;
        let components = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| keep * a + rho * b)
            .collect();
        Ok(Profile {
            components,
            categories: Arc::clone(&self.categories),
        })
    }

    /// Adds `epsilon` to every component and renormalizes.
    pub fn smoothed(&self, epsilon: f64) -> Result<Profile> {
        if !(epsilon.is_finite() && epsilon >= 0.0) {
            return Err(Error::Config(format!(
                "smoothing epsilon must be non-negative, got {}",
                epsilon
            )));
        }
        let shifted: Vec<f64> = self.components.iter().map(|c| c + epsilon).collect();
        Profile::from_weights(Arc::clone(&self.categories), &shifted)
    }

    /// True when every component is finite and non-negative and the sum is
    /// within [`SIMPLEX_TOLERANCE`] of one.
    pub fn is_on_simplex(&self) -> bool {
        self.components.len() == self.categories.len()
            && self.components.iter().all(|c| c.is_finite() && *c >= 0.0)
            && (self.components.iter().sum::<f64>() - 1.0).abs() <= SIMPLEX_TOLERANCE
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("profiles serialize")
    }
}

impl Serialize for Profile {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("Profile", 2)?;
        s.serialize_field("categories", self.categories.labels())?;
        s.serialize_field("components", &self.components)?;
        s.end()
    }
}

fn check_components(categories: &CategorySet, components: &[f64]) -> Result<()> {
    if components.len() != categories.len() {
        return Err(Error::Validation(format!(
            "expected {} components, got {}",
            categories.len(),
            components.len()
        )));
    }
    if let Some(bad) = components.iter().find(|c| !(c.is_finite() && **c >= 0.0)) {
        return Err(Error::Validation(format!("invalid profile component {}", bad)));
    }
    Ok(())
}

/// How the population reference profile aggregates users.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum PopulationMode {
    /// Relative category frequency over all annotations.
    #[default]
    TagWeighted,
    /// Unweighted mean of the user profiles.
    UserAveraged,
}

impl fmt::Display for PopulationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PopulationMode::TagWeighted => "tag_weighted",
            PopulationMode::UserAveraged => "user_averaged",
        })
    }
}

impl FromStr for PopulationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tag_weighted" => Ok(PopulationMode::TagWeighted),
            "user_averaged" => Ok(PopulationMode::UserAveraged),
            other => Err(Error::Config(format!(
                "unknown population mode {:?} (expected tag_weighted or user_averaged)",
                other
            ))),
        }
    }
}

pub fn user_profile(f: &Folksonomy, user: &str) -> Result<Profile> {
    let idx = f
        .user_index(user)
        .ok_or_else(|| Error::UndefinedProfile(format!("unknown user {:?}", user)))?;
    let mut counts = vec![0u64; f.num_categories()];
    for a in f.annotations().iter().filter(|a| a.user == idx) {
        counts[a.category] += 1;
    }
    Profile::from_counts(Arc::clone(f.categories()), &counts)
        .map_err(|_| Error::UndefinedProfile(format!("user {:?} has no annotations", user)))
}

pub fn item_profile(f: &Folksonomy, item: &str) -> Result<Profile> {
    let idx = f
        .item_index(item)
        .ok_or_else(|| Error::UndefinedProfile(format!("unknown item {:?}", item)))?;
    let mut counts = vec![0u64; f.num_categories()];
    for a in f.annotations().iter().filter(|a| a.item == idx) {
        counts[a.category] += 1;
    }
    Profile::from_counts(Arc::clone(f.categories()), &counts)
        .map_err(|_| Error::UndefinedProfile(format!("item {:?} has no annotations", item)))
}

/// Profiles of all users, indexed like `f.users()`; `None` for users with no
/// annotations (possible after a training restriction).
pub fn all_user_profiles(f: &Folksonomy) -> Vec<Option<Profile>> {
    counts_to_profiles(f, f.user_category_counts())
}

/// Profiles of all items, indexed like `f.items()`.
pub fn all_item_profiles(f: &Folksonomy) -> Vec<Option<Profile>> {
    counts_to_profiles(f, f.item_category_counts())
}

fn counts_to_profiles(f: &Folksonomy, counts: Vec<Vec<u64>>) -> Vec<Option<Profile>> {
    counts
        .iter()
        .map(|c| Profile::from_counts(Arc::clone(f.categories()), c).ok())
        .collect()
}

pub fn population_profile(f: &Folksonomy, mode: PopulationMode) -> Result<Profile> {
    if f.annotations().is_empty() {
        return Err(Error::UndefinedProfile("population of an empty folksonomy".into()));
    }
    let categories = Arc::clone(f.categories());
    match mode {
        PopulationMode::TagWeighted => {
            let mut counts = vec![0u64; f.num_categories()];
            for a in f.annotations() {
                counts[a.category] += 1;
            }
            Profile::from_counts(categories, &counts)
        }
        PopulationMode::UserAveraged => {
            let profiles: Vec<Profile> = all_user_profiles(f).into_iter().flatten().collect();
            let mut sum = vec![0.0; f.num_categories()];
            for p in &profiles {
                for (s, c) in sum.iter_mut().zip(p.components()) {
                    *s += c;
                }
            }
            Profile::from_weights(categories, &sum)
        }
    }
}

/// Keeps only the annotations whose `(user, item)` pair the split marks as
/// training. The user and item tables are preserved, so indices stay aligned
/// with `f`; a user whose items all went to test ends up with no annotations.
pub fn restrict_to_training(f: &Folksonomy, split: &SplitAssignment) -> Result<Folksonomy> {
    let mut kept = Vec::with_capacity(f.annotations().len());
    for a in f.annotations() {
        match split.side(a.user, a.item) {
            Some(Side::Train) => kept.push(*a),
            Some(Side::Test) => {}
            None => {
                return Err(Error::Validation(format!(
                    "split does not cover pair ({}, {})",
                    f.users()[a.user],
                    f.items()[a.item]
                )))
            }
        }
    }
    Ok(f.with_annotations(kept))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cats(n: usize) -> Arc<CategorySet> {
        Arc::new(CategorySet::new((0..n).map(|i| format!("c{i}"))).unwrap())
    }

    fn folk(n: usize, triples: &[(&str, &str, usize)]) -> Folksonomy {
        Folksonomy::from_triples(cats(n), triples.iter().map(|&(u, i, c)| (u, i, c))).unwrap()
    }

    #[test]
    fn user_profile_relative_frequencies() {
        let f = folk(2, &[("u", "a", 0), ("u", "b", 0), ("u", "c", 1), ("u", "d", 1)]);
        assert_eq!(user_profile(&f, "u").unwrap().components(), [0.5, 0.5]);

        let f = folk(3, &[("u", "a", 0), ("u", "b", 0)]);
        assert_eq!(user_profile(&f, "u").unwrap().components(), [1.0, 0.0, 0.0]);
        assert!(matches!(user_profile(&f, "nobody"), Err(Error::UndefinedProfile(_))));
    }

    #[test]
    fn item_profile_relative_frequencies() {
        let f = folk(2, &[("u", "x", 1)]);
        assert_eq!(item_profile(&f, "x").unwrap().components(), [0.0, 1.0]);

        let f = folk(3, &[("u", "x", 0), ("v", "x", 1), ("u", "x", 2), ("w", "x", 2)]);
        assert_eq!(item_profile(&f, "x").unwrap().components(), [0.25, 0.25, 0.5]);
    }

    #[test]
    fn population_by_symmetry() {
        let f = folk(
            2,
            &[
                ("u", "a", 0),
                ("u", "a", 0),
                ("u", "a", 0),
                ("u", "b", 1),
                ("v", "a", 1),
                ("v", "b", 1),
                ("v", "c", 1),
                ("v", "c", 0),
            ],
        );
        for mode in [PopulationMode::TagWeighted, PopulationMode::UserAveraged] {
            let p = population_profile(&f, mode).unwrap();
            assert_relative_eq!(p.components()[0], 0.5, epsilon = 1e-15);
            assert_relative_eq!(p.components()[1], 0.5, epsilon = 1e-15);
        }
    }

    #[test]
    fn population_modes_differ_with_unequal_activity() {
        let f = folk(2, &[("u", "a", 0), ("u", "b", 0), ("u", "c", 0), ("v", "a", 1)]);
        let tag = population_profile(&f, PopulationMode::TagWeighted).unwrap();
        let avg = population_profile(&f, PopulationMode::UserAveraged).unwrap();
        assert_eq!(tag.components(), [0.75, 0.25]);
        assert_eq!(avg.components(), [0.5, 0.5]);
    }

    #[test]
    fn constructor_tolerance() {
        let c = cats(2);
        let p = Profile::new(c.clone(), vec![0.5, 0.5 + 5e-10]).unwrap();
        assert!((p.components().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(Profile::new(c.clone(), vec![0.5, 0.6]).is_err());
        assert!(Profile::new(c.clone(), vec![1.5, -0.5]).is_err());
        assert!(Profile::new(c.clone(), vec![1.0]).is_err());
        assert!(Profile::from_weights(c.clone(), &[0.0, 0.0]).is_err());
        assert_eq!(
            Profile::from_weights(c, &[3.0, 1.0]).unwrap().components(),
            [0.75, 0.25]
        );
    }

    #[test]
    fn mismatched_categories_detected() {
        let a = Profile::uniform(cats(2));
        let b = Profile::uniform(Arc::new(CategorySet::new(["x", "y"]).unwrap()));
        assert!(a.mix(&b, 0.5).is_err());
        // equal label lists in distinct allocations are compatible
        assert!(a.mix(&Profile::uniform(cats(2)), 0.5).is_ok());
    }

    #[test]
    fn profile_json_shape() {
        let p = Profile::from_weights(cats(2), &[1.0, 3.0]).unwrap();
        assert_eq!(p.to_json(), r#"{"categories":["c0","c1"],"components":[0.25,0.75]}"#);
    }

    #[test]
    fn smoothing_fills_empty_categories() {
        let p = Profile::new(cats(3), vec![1.0, 0.0, 0.0]).unwrap();
        let s = p.smoothed(1e-6).unwrap();
        assert!(s.components().iter().all(|c| *c > 0.0));
        assert!(s.is_on_simplex());
    }
}
