//! Safety properties over policy-network inputs and outputs, and the
//! workspace-limit suite derived from an environment config.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::environment::{Action, Axis, EnvConfig, Face, Phase, PhasedFace, Side, NUM_ACTIONS, OBS_DIM};
use crate::interval::{Interval, IntervalBox};

pub const SUITE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum PropertyError {
    #[error("property `{property}` dimension {dim}: lower bound {lo} exceeds upper bound {hi}")]
    InvertedBound { property: String, dim: usize, lo: f64, hi: f64 },
    #[error("property `{property}` dimension {dim}: non-finite bound")]
    NonFiniteBound { property: String, dim: usize },
    #[error("property `{property}`: {message}")]
    Invalid { property: String, message: String },
    #[error("duplicate property name `{0}`")]
    DuplicateName(String),
    #[error("unsupported suite version {0}")]
    Version(u32),
    #[error("normalization: {0}")]
    Normalization(String),
    #[error("suite parse error: {0}")]
    Parse(String),
    #[error("degenerate workspace: {0}")]
    DegenerateWorkspace(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Output-side condition of a property.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Condition {
    /// `y[output_index] ∈ required` everywhere in the input box.
    OutputBound { output_index: usize, required: Interval },
    /// The greedy action is never in `unsafe_actions`: for every unsafe `i`
    /// some safe `j` scores strictly higher.
    ActionNotSelected { unsafe_actions: BTreeSet<usize> },
}

impl Condition {
    /// Whether a concrete output vector violates the condition.
    pub fn violated_by(&self, outputs: &[f64]) -> bool {
        match self {
            Condition::OutputBound { output_index, required } => !required.contains(outputs[*output_index]),
            Condition::ActionNotSelected { unsafe_actions } => {
                unsafe_actions.contains(&crate::network::argmax(outputs))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafetyProperty {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub input_box: IntervalBox,
    pub condition: Condition,
}

impl SafetyProperty {
    /// Checks the property against a network's input and output sizes.
    pub fn check_dimensions(&self, input_dim: usize, output_dim: usize) -> Result<(), PropertyError> {
        let invalid = |message: String| PropertyError::Invalid {
            property: self.name.clone(),
            message,
        };
        if self.input_box.dim() != input_dim {
            return Err(invalid(format!(
                "input box has {} dimensions, network expects {input_dim}",
                self.input_box.dim()
            )));
        }
        match &self.condition {
            Condition::OutputBound { output_index, .. } if *output_index >= output_dim => Err(invalid(format!(
                "output index {output_index} out of range for {output_dim} outputs"
            ))),
            Condition::ActionNotSelected { unsafe_actions } => {
                if let Some(&i) = unsafe_actions.iter().find(|&&i| i >= output_dim) {
                    return Err(invalid(format!("unsafe action {i} out of range for {output_dim} outputs")));
                }
                if unsafe_actions.len() >= output_dim {
                    return Err(invalid("unsafe action set must be a strict subset of the outputs".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Per-dimension affine map from physical units to network inputs:
/// `normalized = (physical − offset) · scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub offset: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Normalization {
    pub fn identity(dim: usize) -> Self {
        Self {
            offset: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    /// The environment's observation map: gripper as-is, positions shifted
    /// to the arena corner and scaled by `k`, distance scaled by `k`.
    pub fn for_env(config: &EnvConfig) -> Self {
        let (lo, _) = config.arena();
        let k = config.k();
        Self {
            offset: vec![0.0, lo[0], lo[1], lo[2], lo[0], lo[1], lo[2], 0.0],
            scale: vec![1.0, k, k, k, k, k, k, k],
        }
    }

    pub fn dim(&self) -> usize {
        self.offset.len()
    }

    fn validate(&self) -> Result<(), PropertyError> {
        if self.offset.len() != self.scale.len() {
            return Err(PropertyError::Normalization("offset and scale lengths differ".into()));
        }
        if !self.offset.iter().all(|v| v.is_finite()) || !self.scale.iter().all(|v| v.is_finite() && *v > 0.0) {
            return Err(PropertyError::Normalization(
                "offsets must be finite and scales finite and positive".into(),
            ));
        }
        Ok(())
    }

    /// Maps a physical box into network units.
    pub fn apply(&self, b: &IntervalBox) -> Result<IntervalBox, PropertyError> {
        if b.dim() != self.dim() {
            return Err(PropertyError::Normalization(format!(
                "box has {} dimensions, normalization has {}",
                b.dim(),
                self.dim()
            )));
        }
        let dims = b
            .dims()
            .iter()
            .zip(self.offset.iter().zip(&self.scale))
            .map(|(iv, (&o, &s))| Interval::new((iv.lo() - o) * s, (iv.hi() - o) * s))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| PropertyError::Normalization(e.to_string()))?;
        IntervalBox::new(dims).map_err(|e| PropertyError::Normalization(e.to_string()))
    }
}

/// Ordered, uniquely named properties written in physical units.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertySuite {
    properties: Vec<SafetyProperty>,
    normalization: Option<Normalization>,
}

impl PropertySuite {
    pub fn new(properties: Vec<SafetyProperty>, normalization: Option<Normalization>) -> Result<Self, PropertyError> {
        let mut seen = HashSet::new();
        for p in &properties {
            if !seen.insert(p.name.as_str()) {
                return Err(PropertyError::DuplicateName(p.name.clone()));
            }
            if let Condition::ActionNotSelected { unsafe_actions } = &p.condition {
                if unsafe_actions.is_empty() {
                    return Err(PropertyError::Invalid {
                        property: p.name.clone(),
                        message: "unsafe action set is empty".into(),
                    });
                }
            }
            if let Some(n) = &normalization {
                if n.dim() != p.input_box.dim() {
                    return Err(PropertyError::Invalid {
                        property: p.name.clone(),
                        message: format!(
                            "input box has {} dimensions, normalization has {}",
                            p.input_box.dim(),
                            n.dim()
                        ),
                    });
                }
            }
        }
        if let Some(n) = &normalization {
            n.validate()?;
        }
        Ok(Self {
            properties,
            normalization,
        })
    }

    pub fn properties(&self) -> &[SafetyProperty] {
        &self.properties
    }

    pub fn normalization(&self) -> Option<&Normalization> {
        self.normalization.as_ref()
    }

    pub fn len(&self) -> usize {
        self.properties.len()
    }

    pub fn is_empty(&self) -> bool {
        self.properties.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&SafetyProperty> {
        self.properties.iter().find(|p| p.name == name)
    }

    /// Properties with input boxes mapped into network units, checked
    /// against the network's dimensions.
    pub fn resolve(&self, input_dim: usize, output_dim: usize) -> Result<Vec<SafetyProperty>, PropertyError> {
        self.properties
            .iter()
            .map(|p| {
                let mut q = p.clone();
                if let Some(n) = &self.normalization {
                    q.input_box = n.apply(&p.input_box).map_err(|e| PropertyError::Invalid {
                        property: p.name.clone(),
                        message: e.to_string(),
                    })?;
                }
                q.check_dimensions(input_dim, output_dim)?;
                Ok(q)
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        let doc = SuiteFile {
            version: SUITE_VERSION,
            normalization: self.normalization.clone(),
            properties: self
                .properties
                .iter()
                .map(|p| PropertyFile {
                    name: p.name.clone(),
                    description: p.description.clone(),
                    input_box: p.input_box.dims().iter().map(|d| [d.lo(), d.hi()]).collect(),
                    condition: p.condition.clone(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("suite serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), PropertyError> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|source| PropertyError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PropertyError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| PropertyError::Io {
            path: path.display().to_string(),
            source,
        })?;
        parse_suite(&text)
    }
}

#[derive(Serialize, Deserialize)]
struct SuiteFile {
    version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    normalization: Option<Normalization>,
    properties: Vec<PropertyFile>,
}

#[derive(Serialize, Deserialize)]
struct PropertyFile {
    name: String,
    #[serde(default)]
    description: String,
    input_box: Vec<[f64; 2]>,
    condition: Condition,
}

/// Parses and validates a suite document.
pub fn parse_suite(document: &str) -> Result<PropertySuite, PropertyError> {
    let doc: SuiteFile = serde_json::from_str(document).map_err(|e| PropertyError::Parse(e.to_string()))?;
    if doc.version != SUITE_VERSION {
        return Err(PropertyError::Version(doc.version));
    }
    let mut properties = Vec::with_capacity(doc.properties.len());
    for pf in doc.properties {
        let mut dims = Vec::with_capacity(pf.input_box.len());
        for (dim, &[lo, hi]) in pf.input_box.iter().enumerate() {
            if !lo.is_finite() || !hi.is_finite() {
                return Err(PropertyError::NonFiniteBound { property: pf.name, dim });
            }
            if lo > hi {
                return Err(PropertyError::InvertedBound {
                    property: pf.name,
                    dim,
                    lo,
                    hi,
                });
            }
            dims.push(Interval::new(lo, hi).expect("checked above"));
        }
        let input_box = IntervalBox::new(dims).map_err(|e| PropertyError::Invalid {
            property: pf.name.clone(),
            message: e.to_string(),
        })?;
        properties.push(SafetyProperty {
            name: pf.name,
            description: pf.description,
            input_box,
            condition: pf.condition,
        });
    }
    PropertySuite::new(properties, doc.normalization)
}

/// Workspace-limit properties in canonical order: name, phase, face,
/// description. The approach phase has no upper-y limit.
pub const WORKSPACE_PROPERTIES: [(&str, Phase, Axis, Side, &str); 11] = [
    ("theta_1L", Phase::Approach, Axis::X, Side::Lower, "Lower limit on x-direction (approach)"),
    ("theta_1R", Phase::Approach, Axis::X, Side::Upper, "Upper limit on x-direction (approach)"),
    ("theta_2L", Phase::Approach, Axis::Y, Side::Lower, "Lower limit on y-direction (approach)"),
    ("theta_3L", Phase::Approach, Axis::Z, Side::Lower, "Lower limit on z-direction (approach)"),
    ("theta_3R", Phase::Approach, Axis::Z, Side::Upper, "Upper limit on z-direction (approach)"),
    ("theta_4L", Phase::Retract, Axis::X, Side::Lower, "Lower limit on x-direction (retract)"),
    ("theta_4R", Phase::Retract, Axis::X, Side::Upper, "Upper limit on x-direction (retract)"),
    ("theta_5L", Phase::Retract, Axis::Y, Side::Lower, "Lower limit on y-direction (retract)"),
    ("theta_5R", Phase::Retract, Axis::Y, Side::Upper, "Upper limit on y-direction (retract)"),
    ("theta_6L", Phase::Retract, Axis::Z, Side::Lower, "Lower limit on z-direction (retract)"),
    ("theta_6R", Phase::Retract, Axis::Z, Side::Upper, "Upper limit on z-direction (retract)"),
];

/// The phased workspace face a default property name refers to.
pub fn property_face(name: &str) -> Option<PhasedFace> {
    WORKSPACE_PROPERTIES
        .iter()
        .find(|(n, ..)| *n == name)
        .map(|&(_, phase, axis, side, _)| PhasedFace {
            phase,
            face: Face { axis, side },
        })
}

/// Joint actions moving outward through `face`.
pub fn outward_actions(face: Face) -> BTreeSet<usize> {
    let sign = face.side.outward_sign();
    Action::all()
        .filter(|a| a.alpha()[face.axis.index()] == sign)
        .map(Action::index)
        .collect()
}

/// Options for [`default_suite_with`].
#[derive(Debug, Clone, PartialEq)]
pub struct DefaultSuiteOptions {
    /// Band depth as a fraction of the workspace extent along the
    /// constrained axis.
    pub band_fraction: f64,
    /// Per-property band fractions overriding `band_fraction`.
    pub overrides: BTreeMap<String, f64>,
}

impl Default for DefaultSuiteOptions {
    fn default() -> Self {
        Self {
            band_fraction: 0.1,
            overrides: BTreeMap::new(),
        }
    }
}

pub fn default_suite(config: &EnvConfig) -> Result<PropertySuite, PropertyError> {
    default_suite_with(config, &DefaultSuiteOptions::default())
}

/// Builds the eleven workspace-limit properties. Each input box fixes the
/// gripper flag and goal to the phase's values, confines the tip to a band
/// at one face of the workspace bounding box, and bounds the distance input
/// by the range of distances from the goal to that band. The unsafe set is
/// every joint action with an outward component through the face.
pub fn default_suite_with(config: &EnvConfig, options: &DefaultSuiteOptions) -> Result<PropertySuite, PropertyError> {
    let (lo, hi) = config.workspace.bounding_box();
    let mut properties = Vec::with_capacity(WORKSPACE_PROPERTIES.len());
    for &(name, phase, axis, side, description) in &WORKSPACE_PROPERTIES {
        let fraction = options.overrides.get(name).copied().unwrap_or(options.band_fraction);
        let a = axis.index();
        let depth = fraction * (hi[a] - lo[a]);
        if !(depth > 0.0 && depth.is_finite() && fraction <= 1.0) {
            return Err(PropertyError::DegenerateWorkspace(format!(
                "{name}: band depth {depth} mm from fraction {fraction}"
            )));
        }
        let mut band_lo = lo;
        let mut band_hi = hi;
        match side {
            Side::Lower => band_hi[a] = lo[a] + depth,
            Side::Upper => band_lo[a] = hi[a] - depth,
        }
        let goal = config.goal(phase);
        let (dmin, dmax) = distance_range(goal, band_lo, band_hi);
        let g = f64::from(phase.gripper());
        let mut bounds = vec![(g, g)];
        bounds.extend((0..3).map(|i| (band_lo[i], band_hi[i])));
        bounds.extend((0..3).map(|i| (goal[i], goal[i])));
        bounds.push((dmin, dmax));
        debug_assert_eq!(bounds.len(), OBS_DIM);
        let input_box = IntervalBox::from_bounds(&bounds).map_err(|e| PropertyError::Invalid {
            property: name.into(),
            message: e.to_string(),
        })?;
        properties.push(SafetyProperty {
            name: name.to_string(),
            description: description.to_string(),
            input_box,
            condition: Condition::ActionNotSelected {
                unsafe_actions: outward_actions(Face { axis, side }),
            },
        });
    }
    debug_assert!(properties
        .iter()
        .all(|p| matches!(&p.condition, Condition::ActionNotSelected { unsafe_actions } if unsafe_actions.len() < NUM_ACTIONS)));
    PropertySuite::new(properties, Some(Normalization::for_env(config)))
}

/// Smallest and largest Euclidean distance from `p` to the box `[lo, hi]`.
fn distance_range(p: [f64; 3], lo: [f64; 3], hi: [f64; 3]) -> (f64, f64) {
    let mut near = 0.0;
    let mut far = 0.0;
    for i in 0..3 {
        let n = (lo[i] - p[i]).max(0.0).max(p[i] - hi[i]);
        let f = (p[i] - lo[i]).abs().max((hi[i] - p[i]).abs());
        near += n * n;
        far += f * f;
    }
    (near.sqrt(), far.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_property_doc(input_box: &str) -> String {
        format!(
            r#"{{"version":1,"properties":[{{"name":"p","input_box":{input_box},
                "condition":{{"kind":"output_bound","output_index":0,"required":[0.0,1.0]}}}}]}}"#
        )
    }

    #[test]
    fn parse_single_output_bound() {
        let s = parse_suite(&one_property_doc("[[0.0,1.0]]")).unwrap();
        assert_eq!(s.len(), 1);
        assert!(matches!(s.properties()[0].condition, Condition::OutputBound { output_index: 0, .. }));
    }

    #[test]
    fn parse_errors() {
        let err = parse_suite(&one_property_doc("[[0.0,1.0],[2.0,1.0]]")).unwrap_err();
        assert!(matches!(&err, PropertyError::InvertedBound { property, dim: 1, .. } if property == "p"), "{err}");

        let unknown = r#"{"version":1,"properties":[{"name":"p","input_box":[[0,1]],"condition":{"kind":"bogus"}}]}"#;
        assert!(matches!(parse_suite(unknown), Err(PropertyError::Parse(_))));

        let dup = r#"{"version":1,"properties":[
            {"name":"p","input_box":[[0,1]],"condition":{"kind":"action_not_selected","unsafe_actions":[0]}},
            {"name":"p","input_box":[[0,1]],"condition":{"kind":"action_not_selected","unsafe_actions":[1]}}]}"#;
        assert!(matches!(parse_suite(dup), Err(PropertyError::DuplicateName(n)) if n == "p"));

        let empty = r#"{"version":1,"properties":[
            {"name":"p","input_box":[[0,1]],"condition":{"kind":"action_not_selected","unsafe_actions":[]}}]}"#;
        assert!(parse_suite(empty).is_err());

        let bad_required = r#"{"version":1,"properties":[{"name":"p","input_box":[[0,1]],
            "condition":{"kind":"output_bound","output_index":0,"required":[1.0,0.0]}}]}"#;
        assert!(parse_suite(bad_required).is_err());
    }

    #[test]
    fn dimension_checks() {
        let s = parse_suite(&one_property_doc("[[0.0,1.0]]")).unwrap();
        assert!(s.resolve(1, 1).is_ok());
        assert!(s.resolve(2, 1).is_err());
        assert!(s.resolve(1, 0).is_err());
        let all = SafetyProperty {
            name: "all".into(),
            description: String::new(),
            input_box: IntervalBox::from_bounds(&[(0.0, 1.0)]).unwrap(),
            condition: Condition::ActionNotSelected {
                unsafe_actions: [0, 1].into_iter().collect(),
            },
        };
        assert!(all.check_dimensions(1, 2).is_err());
        assert!(all.check_dimensions(1, 3).is_ok());
    }

    #[test]
    fn default_suite_shape() {
        let cfg = EnvConfig::default();
        let suite = default_suite(&cfg).unwrap();
        assert_eq!(suite.len(), 11);
        let approach = suite
            .properties()
            .iter()
            .filter(|p| p.input_box.get(0).lo() == 0.0)
            .count();
        assert_eq!(approach, 5);
        assert!(suite.get("theta_2R").is_none());

        let unsafe_of = |name: &str| match &suite.get(name).unwrap().condition {
            Condition::ActionNotSelected { unsafe_actions } => unsafe_actions.clone(),
            _ => unreachable!(),
        };
        let u = unsafe_of("theta_1L");
        assert_eq!(u.len(), 9);
        assert!(u.iter().all(|&i| Action::new(i).unwrap().alpha()[0] == -1));
        let u = unsafe_of("theta_6R");
        assert_eq!(u.len(), 9);
        assert!(u.iter().all(|&i| Action::new(i).unwrap().alpha()[2] == 1));

        // Every default box, normalized, stays inside the unit cube.
        for p in suite.resolve(OBS_DIM, NUM_ACTIONS).unwrap() {
            assert!(p.input_box.dims().iter().all(|d| d.lo() >= 0.0 && d.hi() <= 1.0), "{}", p.name);
        }
    }

    #[test]
    fn default_band_geometry() {
        let cfg = EnvConfig::default();
        let suite = default_suite(&cfg).unwrap();
        let p = suite.get("theta_1L").unwrap();
        // x band: 10% of the 50 mm extent at the -x face.
        assert_eq!(p.input_box.get(1).lo(), -25.0);
        assert_eq!(p.input_box.get(1).hi(), -20.0);
        assert_eq!(p.input_box.get(2), Interval::new(0.0, 40.0).unwrap());
        let q = suite.get("theta_5R").unwrap();
        assert_eq!(q.input_box.get(2), Interval::new(36.0, 40.0).unwrap());
        assert_eq!(q.input_box.get(0), Interval::point(1.0));
    }

    #[test]
    fn degenerate_band_rejected() {
        let cfg = EnvConfig::default();
        let opts = DefaultSuiteOptions {
            band_fraction: 0.0,
            ..Default::default()
        };
        assert!(matches!(
            default_suite_with(&cfg, &opts),
            Err(PropertyError::DegenerateWorkspace(_))
        ));
    }

    #[test]
    fn distance_range_matches_brute_force() {
        let p = [0.5, -2.0, 0.5];
        let lo = [-1.0, 0.0, -3.0];
        let hi = [2.0, 4.0, 1.0];
        let (near, far) = distance_range(p, lo, hi);
        let mut bmin = f64::INFINITY;
        let mut bmax: f64 = 0.0;
        let n = 40;
        for i in 0..=n {
            for j in 0..=n {
                for k in 0..=n {
                    let q = [
                        lo[0] + (hi[0] - lo[0]) * i as f64 / n as f64,
                        lo[1] + (hi[1] - lo[1]) * j as f64 / n as f64,
                        lo[2] + (hi[2] - lo[2]) * k as f64 / n as f64,
                    ];
                    let d = ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2) + (q[2] - p[2]).powi(2)).sqrt();
                    bmin = bmin.min(d);
                    bmax = bmax.max(d);
                }
            }
        }
        assert!((near - bmin).abs() < 1e-9 && (far - bmax).abs() < 1e-9);
    }

    #[test]
    fn property_faces() {
        let f = property_face("theta_4R").unwrap();
        assert_eq!(f.phase, Phase::Retract);
        assert_eq!(
            f.face,
            Face {
                axis: Axis::X,
                side: Side::Upper
            }
        );
        assert!(property_face("theta_2R").is_none());
    }
}
