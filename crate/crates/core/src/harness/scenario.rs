use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::oracle::MAX_NODES;
use crate::attractors::USpec;
use crate::systems::BUILTIN_NAMES;
use crate::{Error, PointMap, Result};

/// Environment variable that overrides the output directory.
pub const OUTPUT_ENV: &str = "CHAINTOPO_OUT";

/// Named checks, listed in the order they run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    /// Chain components and their flags, with a brute-force cross-check on small grids.
    #[serde(alias = "components")]
    Decomposition,
    /// A chain-transitive Λ with interior and shadowing is clopen.
    InteriorClopen,
    /// Boundaries of attractors are chain stable.
    BoundaryStability,
    /// Attractor constructions around chain components.
    BoundaryAttractors,
    Shadowing,
    /// Component counts and flags across the resolution ladder.
    Refinement,
    /// Boundary component counts and the Hausdorff approach of the ring.
    BoundaryTopology,
    Oracle,
}

impl Suite {
    pub const ALL: [Suite; 8] = [
        Suite::Decomposition,
        Suite::InteriorClopen,
        Suite::BoundaryStability,
        Suite::BoundaryAttractors,
        Suite::Shadowing,
        Suite::Refinement,
        Suite::BoundaryTopology,
        Suite::Oracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Decomposition => "decomposition",
            Suite::InteriorClopen => "interior_clopen",
            Suite::BoundaryStability => "boundary_stability",
            Suite::BoundaryAttractors => "boundary_attractors",
            Suite::Shadowing => "shadowing",
            Suite::Refinement => "refinement",
            Suite::BoundaryTopology => "boundary_topology",
            Suite::Oracle => "oracle",
        }
    }

    /// Suites that need a point map on a grid.
    pub fn needs_grid(self) -> bool {
        !matches!(self, Suite::Decomposition | Suite::BoundaryAttractors | Suite::Oracle)
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "components" {
            return Ok(Suite::Decomposition);
        }
        Suite::ALL.into_iter().find(|x| x.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Suite::ALL.iter().map(|x| x.name()).collect();
            Error::config(format!("unknown suite `{s}` (expected one of {})", names.join(", ")))
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemSpec {
    Builtin {
        name: String,
        #[serde(default)]
        params: Vec<f64>,
    },
    RandomDigraph { nodes: usize, density: f64, seed: u64 },
}

impl SystemSpec {
    pub fn label(&self) -> String {
        match self {
            SystemSpec::Builtin { name, .. } => name.clone(),
            SystemSpec::RandomDigraph { nodes, density, seed } => format!("random_digraph(n={nodes},p={density},seed={seed})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Optional check against the system's own domain (`circle`, `torus2`, `interval`).
    #[serde(default)]
    pub kind: Option<String>,
    #[serde(default)]
    pub resolutions: Vec<usize>,
    /// Chain step δ in cell diameters, strictly decreasing.
    #[serde(default = "default_delta_cells")]
    pub delta_cells: Vec<f64>,
    /// Stability radius ε in cell diameters.
    #[serde(default = "default_epsilon_cells")]
    pub epsilon_cells: Vec<f64>,
}

fn default_delta_cells() -> Vec<f64> {
    vec![1.0]
}

fn default_epsilon_cells() -> Vec<f64> {
    vec![5.0]
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            kind: None,
            resolutions: Vec::new(),
            delta_cells: default_delta_cells(),
            epsilon_cells: default_epsilon_cells(),
        }
    }
}

/// Candidate Λ for the interior/clopen suite.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LambdaSpec {
    #[default]
    Whole,
    /// The chain component containing the cell of this point.
    Component { at: Vec<f64> },
    Region { region: USpec },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShadowingSpec {
    /// Step size of the pseudo-orbits fed to the linear solver.
    pub delta: f64,
    pub chains: usize,
    pub length: usize,
    /// ε values for the empirical modulus.
    pub epsilons: Vec<f64>,
    pub trials: usize,
    /// Chain length of the modulus estimate; ten times the finest resolution if absent.
    pub chain_length: Option<usize>,
    /// Radii of the pipeline: shadow B_b, certify on B_c.
    pub b: f64,
    pub c: f64,
    pub limit_trials: usize,
    pub glue_trials: usize,
    pub histogram_bins: usize,
}

impl Default for ShadowingSpec {
    fn default() -> Self {
        ShadowingSpec {
            delta: 1e-8,
            chains: 100,
            length: 10_000,
            epsilons: vec![0.01],
            trials: 6,
            chain_length: None,
            b: 0.1,
            c: 0.2,
            limit_trials: 40,
            glue_trials: 10,
            histogram_bins: 20,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorollarySpec {
    /// Neighborhood radius a, in cell diameters.
    pub a_cells: f64,
    /// Arc endpoints step for the trapping-arc enumeration; 0 picks n/48.
    pub arc_stride: usize,
}

impl Default for CorollarySpec {
    fn default() -> Self {
        CorollarySpec { a_cells: 10.0, arc_stride: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefinementSpec {
    pub iterations: usize,
}

impl Default for RefinementSpec {
    fn default() -> Self {
        RefinementSpec { iterations: 50 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSpec {
    /// Node counts cycle through `1..=max_nodes` unless `nodes` fixes them.
    pub max_nodes: usize,
    pub nodes: Option<usize>,
    pub densities: Vec<f64>,
    pub seeds: u64,
    pub first_seed: u64,
}

impl Default for OracleSpec {
    fn default() -> Self {
        OracleSpec { max_nodes: 12, nodes: None, densities: vec![0.1, 0.2, 0.4], seeds: 1000, first_seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub system: SystemSpec,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub lambda: LambdaSpec,
    /// Trapping regions for the attractor suites.
    #[serde(default)]
    pub attractors: Vec<USpec>,
    #[serde(default)]
    pub suites: Vec<Suite>,
    /// Expected chain component count for the decomposition suite.
    #[serde(default)]
    pub expect_components: Option<usize>,
    #[serde(default)]
    pub shadowing: ShadowingSpec,
    #[serde(default)]
    pub corollaries: CorollarySpec,
    #[serde(default)]
    pub refinement: RefinementSpec,
    #[serde(default)]
    pub oracle: OracleSpec,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn default_name() -> String {
    "scenario".into()
}

/// 1-based line of the first `key = ...` assignment in a TOML source.
fn line_of(text: &str, key: &str) -> Option<usize> {
    text.lines().position(|l| {
        let l = l.trim_start();
        l.strip_prefix(key).is_some_and(|rest| rest.trim_start().starts_with('='))
    })
    .map(|i| i + 1)
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        s.validate_with_source(Some(text))?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        Scenario::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_with_source(None)
    }

    fn validate_with_source(&self, text: Option<&str>) -> Result<()> {
        let fail = |field: &str, msg: String| {
            let key = field.rsplit('.').next().unwrap_or(field);
            let at = text.and_then(|t| line_of(t, key)).map(|l| format!("line {l}, ")).unwrap_or_default();
            Err(Error::config(format!("{at}field `{field}`: {msg}")))
        };
        match &self.system {
            SystemSpec::Builtin { name, params } => {
                if !BUILTIN_NAMES.contains(&name.as_str()) {
                    return fail("system.name", format!("unknown system `{name}` (expected one of {})", BUILTIN_NAMES.join(", ")));
                }
                let f = match PointMap::builtin(name, params) {
                    Ok(f) => f,
                    Err(e) => return fail("system.params", e.to_string()),
                };
                if let Some(kind) = &self.grid.kind {
                    let domain = f.domain().to_string();
                    if *kind != domain {
                        return fail("grid.kind", format!("`{name}` lives on a {domain}, not a {kind}"));
                    }
                }
                if self.grid.resolutions.is_empty() {
                    return fail("grid.resolutions", "need at least one resolution".into());
                }
                if self.grid.resolutions.contains(&0) {
                    return fail("grid.resolutions", "resolutions must be positive".into());
                }
            }
            SystemSpec::RandomDigraph { nodes, density, .. } => {
                if *nodes == 0 || *nodes > MAX_NODES {
                    return fail("system.nodes", format!("need 1..={MAX_NODES} nodes, got {nodes}"));
                }
                if !(0.0..=1.0).contains(density) {
                    return fail("system.density", format!("density must lie in [0, 1], got {density}"));
                }
                if let Some(s) = self.suites.iter().find(|s| s.needs_grid()) {
                    return fail("suites", format!("suite `{s}` needs a builtin map on a grid"));
                }
            }
        }
        let g = &self.grid;
        if g.resolutions.windows(2).any(|w| w[1] <= w[0]) {
            return fail("grid.resolutions", format!("resolutions must be strictly increasing, got {:?}", g.resolutions));
        }
        if g.delta_cells.is_empty() || g.delta_cells.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
            return fail("grid.delta_cells", "delta ladder must be nonempty and positive".into());
        }
        if g.delta_cells.windows(2).any(|w| w[1] >= w[0]) {
            return fail("grid.delta_cells", format!("delta ladder must be strictly decreasing, got {:?}", g.delta_cells));
        }
        if g.epsilon_cells.is_empty() || g.epsilon_cells.iter().any(|e| !(*e > 0.0)) {
            return fail("grid.epsilon_cells", "need at least one positive epsilon".into());
        }
        if let LambdaSpec::Component { at } = &self.lambda {
            if at.is_empty() || at.len() > 2 {
                return fail("lambda.at", "point needs one or two coordinates".into());
            }
        }
        let sh = &self.shadowing;
        if !(sh.delta > 0.0) || sh.chains == 0 || sh.length == 0 || sh.trials == 0 {
            return fail("shadowing", "delta, chains, length and trials must be positive".into());
        }
        if sh.epsilons.iter().any(|e| !(*e > 0.0)) {
            return fail("shadowing.epsilons", "epsilons must be positive".into());
        }
        if !(0.0 < sh.b && sh.b < sh.c) {
            return fail("shadowing.c", format!("need 0 < b < c, got b = {}, c = {}", sh.b, sh.c));
        }
        if !(self.corollaries.a_cells > 0.0) {
            return fail("corollaries.a_cells", "a must be positive".into());
        }
        let o = &self.oracle;
        if o.max_nodes == 0 || o.max_nodes > MAX_NODES {
            return fail("oracle.max_nodes", format!("need 1..={MAX_NODES}, got {}", o.max_nodes));
        }
        if o.nodes.is_some_and(|n| n == 0 || n > MAX_NODES) {
            return fail("oracle.nodes", format!("need 1..={MAX_NODES} nodes"));
        }
        if o.densities.is_empty() || o.densities.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return fail("oracle.densities", "densities must lie in [0, 1]".into());
        }
        let two_grids = [Suite::Refinement, Suite::BoundaryTopology];
        if let Some(s) = self.suites.iter().find(|s| two_grids.contains(s)) {
            if g.resolutions.len() < 2 {
                return fail("grid.resolutions", format!("suite `{s}` needs at least two resolutions"));
            }
        }
        if self.suites.contains(&Suite::BoundaryTopology) && self.attractors.is_empty() {
            return fail("attractors", "suite `boundary_topology` needs at least one U-spec".into());
        }
        Ok(())
    }

    /// Selected suites, deduplicated, in run order.
    pub fn ordered_suites(&self) -> Vec<Suite> {
        let mut s = self.suites.clone();
        s.sort();
        s.dedup();
        s
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    /// Hash of everything that affects results; the output location is left out.
    pub fn config_hash(&self) -> String {
        let subject = Scenario { output: None, ..self.clone() };
        let json = serde_json::to_vec(&subject).expect("scenario serializes");
        hex::encode(Sha256::digest(&json))
    }

    /// `$CHAINTOPO_OUT` if set, else the configured path, else `chaintopo-out/<name>`.
    pub fn output_dir(&self) -> PathBuf {
        if let Some(dir) = std::env::var_os(OUTPUT_ENV) {
            return PathBuf::from(dir);
        }
        self.output.clone().unwrap_or_else(|| PathBuf::from("chaintopo-out").join(&self.name))
    }

    pub fn point_map(&self) -> Result<Option<PointMap>> {
        match &self.system {
            SystemSpec::Builtin { name, params } => PointMap::builtin(name, params).map(Some),
            SystemSpec::RandomDigraph { .. } => Ok(None),
        }
    }

    /// Scenario for a single suite on a builtin with per-system defaults.
    pub fn preset(suite: Suite, system: &str, grid: Option<usize>, delta_cells: Option<f64>, seed: u64) -> Result<Self> {
        use std::f64::consts::PI;
        let f = PointMap::builtin(system, &[])?;
        let arc = |from: f64, to: f64| USpec::Arc { from, to };
        let (mut resolutions, lambda, attractors) = match system {
            "cat_torus" => (vec![61, 101], LambdaSpec::Whole, vec![USpec::Whole]),
            "ns_circle" => (vec![360, 720], LambdaSpec::Component { at: vec![0.0] }, vec![arc(-1.0, 1.0)]),
            "ms4_circle" => (vec![360, 720], LambdaSpec::Component { at: vec![0.0] }, vec![arc(-0.3, PI + 0.3)]),
            "square_interval" => (
                vec![256, 512],
                LambdaSpec::Component { at: vec![0.0] },
                vec![USpec::Interval { from: 0.0, to: 0.5 }],
            ),
            _ => (vec![180, 360], LambdaSpec::Region { region: arc(0.5, 1.5) }, vec![arc(0.5, 1.5)]),
        };
        if let Some(n) = grid {
            resolutions = if matches!(suite, Suite::Refinement | Suite::BoundaryTopology) { vec![n / 2, n] } else { vec![n] };
        } else if !matches!(suite, Suite::Refinement | Suite::BoundaryTopology) {
            resolutions = vec![*resolutions.last().expect("nonempty")];
        }
        let s = Scenario {
            name: format!("{}-{}", suite.name(), f.name()),
            seed,
            system: SystemSpec::Builtin { name: system.into(), params: Vec::new() },
            grid: GridSpec { resolutions, delta_cells: vec![delta_cells.unwrap_or(1.0)], ..GridSpec::default() },
            lambda,
            attractors,
            suites: vec![suite],
            expect_components: None,
            shadowing: ShadowingSpec::default(),
            corollaries: CorollarySpec::default(),
            refinement: RefinementSpec::default(),
            oracle: OracleSpec::default(),
            output: None,
        };
        s.validate()?;
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "ns"
seed = 3
suites = ["components"]

[system]
kind = "builtin"
name = "ns_circle"
params = [0.5]

[grid]
resolutions = [720]
delta_cells = [1.0]
"#;

    #[test]
    fn minimal_config_parses() {
        let s = Scenario::from_toml_str(MINIMAL).unwrap();
        assert_eq!(s.suites, vec![Suite::Decomposition]);
        assert_eq!(s.grid.epsilon_cells, vec![5.0]);
        assert_eq!(s.lambda, LambdaSpec::Whole);
    }

    #[test]
    fn increasing_delta_ladder_is_rejected_with_line() {
        let text = MINIMAL.replace("delta_cells = [1.0]", "delta_cells = [1.0, 2.0]");
        let err = Scenario::from_toml_str(&text).unwrap_err().to_string();
        assert!(err.contains("strictly decreasing") && err.contains("line 13"), "{err}");
    }

    #[test]
    fn decreasing_resolutions_are_rejected() {
        let text = MINIMAL.replace("resolutions = [720]", "resolutions = [720, 360]");
        assert!(Scenario::from_toml_str(&text).unwrap_err().to_string().contains("strictly increasing"));
    }

    #[test]
    fn unknown_names_are_rejected() {
        let bad_system = MINIMAL.replace("ns_circle", "nope");
        assert!(Scenario::from_toml_str(&bad_system).unwrap_err().to_string().contains("unknown system"));
        let bad_suite = MINIMAL.replace("\"components\"", "\"everything\"");
        let err = Scenario::from_toml_str(&bad_suite).unwrap_err().to_string();
        assert!(err.contains("line 4"), "{err}");
        let bad_field = MINIMAL.replace("seed = 3", "sed = 3");
        assert!(Scenario::from_toml_str(&bad_field).unwrap_err().to_string().contains("sed"));
    }

    #[test]
    fn digraph_rejects_grid_suites() {
        let text = r#"
suites = ["interior_clopen"]
[system]
kind = "random_digraph"
nodes = 8
density = 0.2
seed = 1
"#;
        assert!(Scenario::from_toml_str(text).unwrap_err().to_string().contains("needs a builtin"));
    }

    #[test]
    fn hash_tracks_content() {
        let a = Scenario::from_toml_str(MINIMAL).unwrap();
        let mut b = a.clone();
        assert_eq!(a.config_hash(), b.config_hash());
        b.seed += 1;
        assert_ne!(a.config_hash(), b.config_hash());
    }

    #[test]
    fn presets_validate() {
        for name in BUILTIN_NAMES {
            for suite in Suite::ALL {
                Scenario::preset(suite, name, None, None, 0).unwrap();
            }
        }
        assert!(Scenario::preset(Suite::Shadowing, "nope", None, None, 0).is_err());
    }
}
