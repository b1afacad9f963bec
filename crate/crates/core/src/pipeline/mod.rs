//! Semi-automatic fat segmentation on the fat-only Dixon volume.
//!
//! The body mask from the structural scan is mapped into the Dixon grid
//! through the scan affines and defines a box-shaped volume of interest.
//! Inside it the fat channel is thresholded, optionally cleaned by
//! morphology, and components below a size limit are dropped. The order is
//! fixed: threshold → silhouette AND → morphology → VOI clip and silhouette
//! AND → component filter.

pub mod components;
pub mod morphology;
pub mod threshold;

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

pub use components::{filter_small_components, label_components, Connectivity, LabeledComponents};
pub use morphology::{morph, MorphOp, MorphStep, StructuringElement};
pub use threshold::{otsu_threshold, threshold_in_voi};

use crate::error::{Error, Result};
use crate::geometry::{bounding_box, expand_box, resample_mask_nearest, VoxelBox};
use crate::volume::{Mask, Volume};

pub const DEFAULT_MIN_COMPONENT_VOXELS: usize = 50;
pub const DEFAULT_VOI_MARGIN_MM: f64 = 5.0;
/// Nearest-neighbour mapping misplaces the body surface by up to half a
/// source voxel, so the silhouette is dilated by this much before the AND.
pub const DEFAULT_SILHOUETTE_MARGIN_MM: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Threshold {
    Value(f64),
    Otsu,
}

impl FromStr for Threshold {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("otsu") {
            return Ok(Self::Otsu);
        }
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Self::Value(v)),
            _ => Err(Error::Params(format!(
                "threshold must be a finite number or 'otsu', got '{s}'"
            ))),
        }
    }
}

impl TryFrom<String> for Threshold {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Threshold> for String {
    fn from(t: Threshold) -> String {
        t.to_string()
    }
}

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Threshold::Value(v) => write!(f, "{v}"),
            Threshold::Otsu => f.write_str("otsu"),
        }
    }
}

/// Fully resolved parameters of one segmentation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineParams {
    pub threshold: Threshold,
    pub min_component_voxels: usize,
    pub connectivity: Connectivity,
    pub voi_margin_mm: f64,
    /// Applied in order.
    pub morphology: Vec<MorphStep>,
    /// Restrict to the bounding box of the mapped body plus margin; when
    /// off the whole grid is the VOI.
    pub voi_box: bool,
    /// AND the thresholded mask with the mapped body silhouette.
    pub silhouette: bool,
    /// Dilation radius of the silhouette used for the AND.
    pub silhouette_margin_mm: f64,
    /// Explicit VOI replacing the computed box.
    pub voi: Option<VoxelBox>,
}

impl PipelineParams {
    pub fn new(threshold: Threshold) -> Self {
        Self {
            threshold,
            min_component_voxels: DEFAULT_MIN_COMPONENT_VOXELS,
            connectivity: Connectivity::default(),
            voi_margin_mm: DEFAULT_VOI_MARGIN_MM,
            morphology: Vec::new(),
            voi_box: true,
            silhouette: true,
            silhouette_margin_mm: DEFAULT_SILHOUETTE_MARGIN_MM,
            voi: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_component_voxels < 1 {
            return Err(Error::Params("min_component_voxels must be >= 1".into()));
        }
        if let Threshold::Value(v) = self.threshold {
            if !v.is_finite() {
                return Err(Error::Params(format!("threshold must be finite, got {v}")));
            }
        }
        if !(self.voi_margin_mm >= 0.0 && self.voi_margin_mm.is_finite()) {
            return Err(Error::Params(format!(
                "voi_margin_mm must be >= 0, got {}",
                self.voi_margin_mm
            )));
        }
        if !(self.silhouette_margin_mm >= 0.0 && self.silhouette_margin_mm.is_finite()) {
            return Err(Error::Params(format!(
                "silhouette_margin_mm must be >= 0, got {}",
                self.silhouette_margin_mm
            )));
        }
        if let Some(bad) = self
            .morphology
            .iter()
            .find(|s| !(s.radius_mm >= 0.0 && s.radius_mm.is_finite()))
        {
            return Err(Error::Params(format!("morphology radius must be >= 0, got {}", bad.radius_mm)));
        }
        Ok(())
    }

    /// `key=value` lines accepted by [`ParamOverrides::from_config_str`].
    pub fn to_config_string(&self) -> String {
        let mut out = format!(
            "threshold={}\nmin-component={}\nconnectivity={}\nvoi-margin-mm={}\nvoi-box={}\nsilhouette={}\nsilhouette-margin-mm={}\n",
            self.threshold,
            self.min_component_voxels,
            self.connectivity,
            self.voi_margin_mm,
            self.voi_box,
            self.silhouette,
            self.silhouette_margin_mm
        );
        for step in &self.morphology {
            out.push_str(&format!("morph={step}\n"));
        }
        if let Some(voi) = &self.voi {
            out.push_str(&format!("voi={}\n", format_voi(voi)));
        }
        out
    }
}

pub fn format_voi(voi: &VoxelBox) -> String {
    let [a, b, c] = voi.lo;
    let [d, e, f] = voi.hi;
    format!("{a},{b},{c},{d},{e},{f}")
}

/// Parse `x0,y0,z0,x1,y1,z1` (inclusive corners).
pub fn parse_voi(s: &str) -> Result<VoxelBox> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Params(format!("VOI must be six non-negative integers, got '{s}'")))?;
    let [x0, y0, z0, x1, y1, z1]: [usize; 6] = parts
        .try_into()
        .map_err(|_| Error::Params(format!("VOI must be six non-negative integers, got '{s}'")))?;
    VoxelBox::new([x0, y0, z0], [x1, y1, z1]).map_err(|e| Error::Params(e.to_string()))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::Params(format!("{key} expects true/false, got '{v}'"))),
    }
}

fn parse_mm(key: &str, v: &str) -> Result<f64> {
    v.trim()
        .parse()
        .map_err(|_| Error::Params(format!("{key} expects a number, got '{v}'")))
}

/// Split a `key=value` config text into pairs. Blank lines and `#`
/// comments are skipped; keys are normalized to kebab-case.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Params(format!("config line {}: expected key=value, got '{line}'", n + 1)))?;
        out.push((k.trim().replace('_', "-").to_ascii_lowercase(), v.trim().to_string()));
    }
    Ok(out)
}

/// Partially specified parameters, layered config-then-flags before
/// resolution.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamOverrides {
    pub threshold: Option<Threshold>,
    pub min_component_voxels: Option<usize>,
    pub connectivity: Option<Connectivity>,
    pub voi_margin_mm: Option<f64>,
    pub morphology: Option<Vec<MorphStep>>,
    pub voi_box: Option<bool>,
    pub silhouette: Option<bool>,
    pub silhouette_margin_mm: Option<f64>,
    pub voi: Option<VoxelBox>,
}

impl ParamOverrides {
    /// Apply one config entry. Returns `false` for keys that are not
    /// pipeline parameters.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<bool> {
        match key {
            "threshold" => self.threshold = Some(value.parse()?),
            "min-component" | "min-component-voxels" => {
                let n: usize = value
                    .trim()
                    .parse()
                    .map_err(|_| Error::Params(format!("min-component expects an integer, got '{value}'")))?;
                self.min_component_voxels = Some(n);
            }
            "connectivity" => self.connectivity = Some(value.parse()?),
            "voi-margin-mm" => self.voi_margin_mm = Some(parse_mm(key, value)?),
            "silhouette-margin-mm" => self.silhouette_margin_mm = Some(parse_mm(key, value)?),
            "morph" => self.morphology.get_or_insert_with(Vec::new).push(value.parse()?),
            "voi-box" => self.voi_box = Some(parse_bool(key, value)?),
            "silhouette" => self.silhouette = Some(parse_bool(key, value)?),
            "voi" => self.voi = Some(parse_voi(value)?),
            _ => return Ok(false),
        }
        Ok(true)
    }

    pub fn from_config_str(text: &str) -> Result<Self> {
        let mut out = Self::default();
        for (k, v) in parse_config(text)? {
            if !out.apply(&k, &v)? {
                return Err(Error::Params(format!("unknown pipeline key '{k}'")));
            }
        }
        Ok(out)
    }

    /// `other` wins wherever it is set.
    pub fn merged(mut self, other: ParamOverrides) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f; } )* };
        }
        take!(threshold, min_component_voxels, connectivity, voi_margin_mm, morphology, voi_box, silhouette, silhouette_margin_mm, voi);
        self
    }

    pub fn resolve(self) -> Result<PipelineParams> {
        let threshold = self.threshold.ok_or_else(|| {
            Error::Params("a threshold is required (a number, or 'otsu')".into())
        })?;
        let mut p = PipelineParams::new(threshold);
        if let Some(v) = self.min_component_voxels {
            p.min_component_voxels = v;
        }
        if let Some(v) = self.connectivity {
            p.connectivity = v;
        }
        if let Some(v) = self.voi_margin_mm {
            p.voi_margin_mm = v;
        }
        if let Some(v) = self.morphology {
            p.morphology = v;
        }
        if let Some(v) = self.voi_box {
            p.voi_box = v;
        }
        if let Some(v) = self.silhouette {
            p.silhouette = v;
        }
        if let Some(v) = self.silhouette_margin_mm {
            p.silhouette_margin_mm = v;
        }
        p.voi = self.voi;
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StageTiming {
    pub stage: &'static str,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct SemiAutoOutput {
    pub fat_mask: Mask,
    /// Body mask resampled into the fat volume's grid.
    pub body_mask: Mask,
    pub voi: VoxelBox,
    /// Numeric threshold actually applied (resolved when Otsu).
    pub threshold: f64,
    pub timings: Vec<StageTiming>,
}

/// Map the body mask into `fat`'s grid and derive the VOI box.
pub fn map_body_voi(fat_grid: &crate::volume::Grid, body_src: &Mask, margin_mm: f64) -> Result<(Mask, VoxelBox)> {
    if body_src.is_empty() {
        return Err(Error::EmptyMask("body mask has no foreground"));
    }
    let body = resample_mask_nearest(body_src, fat_grid)?;
    if body.is_empty() {
        return Err(Error::EmptyMask("body mask falls outside the target grid"));
    }
    let voi = expand_box(&bounding_box(&body)?, margin_mm, fat_grid)?;
    Ok((body, voi))
}

fn clip_to_box(mask: &mut Mask, voi: &VoxelBox) {
    let grid = mask.grid().clone();
    for (idx, v) in mask.data_mut().iter_mut().enumerate() {
        if *v {
            let [i, j, k] = grid.coords(idx);
            *v = voi.contains(i, j, k);
        }
    }
}

fn and_in_place(mask: &mut Mask, other: &Mask) {
    for (a, b) in mask.data_mut().iter_mut().zip(other.data()) {
        *a &= *b;
    }
}

pub fn run_semi_auto_detailed(fat: &Volume, body_src: &Mask, params: &PipelineParams) -> Result<SemiAutoOutput> {
    params.validate()?;
    let mut timings = Vec::new();
    let mut clock = Instant::now();
    let mut lap = |stage: &'static str, timings: &mut Vec<StageTiming>| {
        let d: Duration = clock.elapsed();
        timings.push(StageTiming { stage, seconds: d.as_secs_f64() });
        clock = Instant::now();
    };

    let (body, mapped_voi) = map_body_voi(fat.grid(), body_src, params.voi_margin_mm)?;
    let dims = fat.grid().dims();
    let voi = match (&params.voi, params.voi_box) {
        (Some(explicit), _) => {
            if !explicit.fits(dims) {
                return Err(Error::Params(format!("explicit VOI {explicit:?} exceeds grid {dims:?}")));
            }
            *explicit
        }
        (None, true) => mapped_voi,
        (None, false) => VoxelBox::full(dims),
    };
    lap("map_voi", &mut timings);

    let threshold = match params.threshold {
        Threshold::Value(v) => v,
        Threshold::Otsu => otsu_threshold(fat, &voi)?,
    };
    let mut mask = threshold_in_voi(fat, &voi, threshold)?;
    let silhouette = if params.silhouette {
        let se = StructuringElement::ball(params.silhouette_margin_mm, fat.grid().spacing());
        let s = morphology::dilate(&body, &se);
        and_in_place(&mut mask, &s);
        Some(s)
    } else {
        None
    };
    lap("threshold", &mut timings);

    for step in &params.morphology {
        mask = morph(&mask, step.op, step.radius_mm)?;
    }
    clip_to_box(&mut mask, &voi);
    if let Some(s) = &silhouette {
        and_in_place(&mut mask, s);
    }
    lap("morphology", &mut timings);

    let fat_mask = filter_small_components(&mask, params.min_component_voxels, params.connectivity)?;
    lap("component_filter", &mut timings);

    Ok(SemiAutoOutput {
        fat_mask,
        body_mask: body,
        voi,
        threshold,
        timings,
    })
}

/// The fat mask in the Dixon grid; see [`run_semi_auto_detailed`].
pub fn run_semi_auto(fat: &Volume, body_src: &Mask, params: &PipelineParams) -> Result<Mask> {
    run_semi_auto_detailed(fat, body_src, params).map(|o| o.fat_mask)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_parsing() {
        assert_eq!("otsu".parse::<Threshold>().unwrap(), Threshold::Otsu);
        assert_eq!("OTSU".parse::<Threshold>().unwrap(), Threshold::Otsu);
        assert_eq!("60.5".parse::<Threshold>().unwrap(), Threshold::Value(60.5));
        assert!("inf".parse::<Threshold>().is_err());
        assert!("abc".parse::<Threshold>().is_err());
    }

    #[test]
    fn config_round_trip() {
        let mut p = PipelineParams::new(Threshold::Value(42.0));
        p.connectivity = Connectivity::Six;
        p.morphology = vec!["open:2.5".parse().unwrap(), "close:1.25".parse().unwrap()];
        p.silhouette = false;
        p.voi = Some(VoxelBox::new([1, 2, 3], [4, 5, 6]).unwrap());
        let back = ParamOverrides::from_config_str(&p.to_config_string())
            .unwrap()
            .resolve()
            .unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn later_layers_override_earlier_ones() {
        let config = ParamOverrides::from_config_str(
            "# defaults\nthreshold = otsu\nmin_component = 10\nmorph=open:1\n",
        )
        .unwrap();
        let flags = ParamOverrides {
            threshold: Some(Threshold::Value(5.0)),
            ..Default::default()
        };
        let p = config.merged(flags).resolve().unwrap();
        assert_eq!(p.threshold, Threshold::Value(5.0));
        assert_eq!(p.min_component_voxels, 10);
        assert_eq!(p.morphology.len(), 1);
        assert_eq!(p.voi_margin_mm, DEFAULT_VOI_MARGIN_MM);
        assert_eq!(p.connectivity, Connectivity::TwentySix);
    }

    #[test]
    fn missing_threshold_is_an_error() {
        assert!(ParamOverrides::default().resolve().is_err());
        assert!(ParamOverrides::from_config_str("bogus=1").is_err());
        assert!(ParamOverrides::from_config_str("min-component=0\nthreshold=1")
            .unwrap()
            .resolve()
            .is_err());
    }

    #[test]
    fn voi_parsing() {
        assert_eq!(parse_voi("1,2,3,4,5,6").unwrap(), VoxelBox::new([1, 2, 3], [4, 5, 6]).unwrap());
        assert!(parse_voi("1,2,3").is_err());
        assert!(parse_voi("5,0,0,4,0,0").is_err());
    }
}
