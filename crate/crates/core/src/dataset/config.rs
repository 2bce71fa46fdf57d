//! `key = value` configuration for the scene generator.

use std::fmt::Write as _;

use crate::geometry::CameraIntrinsics;
use crate::{Error, Result};

/// Parses `key = value` lines; `#` starts a comment line. Returns
/// `(line number, key, value)` triples in file order.
pub fn parse_key_values(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::parse(i + 1, format!("expected `key = value`, found `{line}`")));
        };
        let key = k.trim();
        if key.is_empty() {
            return Err(Error::parse(i + 1, "empty key"));
        }
        out.push((i + 1, key.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

trait ConfigValue: Sized {
    fn parse_value(s: &str) -> Option<Self>;
    fn render(&self) -> String;
}

impl ConfigValue for f64 {
    fn parse_value(s: &str) -> Option<Self> {
        s.parse::<f64>().ok().filter(|v| v.is_finite())
    }
    fn render(&self) -> String {
        format!("{self:?}")
    }
}

impl ConfigValue for usize {
    fn parse_value(s: &str) -> Option<Self> {
        s.parse().ok()
    }
    fn render(&self) -> String {
        self.to_string()
    }
}

macro_rules! generator_config {
    ($($(#[doc = $doc:literal])* $name:ident : $ty:ty = $default:expr;)*) => {
        /// Scene generator settings. Lengths are meters, speeds meters per
        /// frame, angles radians, image quantities pixels.
        #[derive(Debug, Clone, PartialEq)]
        pub struct GeneratorConfig {
            $($(#[doc = $doc])* pub $name: $ty,)*
        }

        impl Default for GeneratorConfig {
            fn default() -> Self {
                Self { $($name: $default,)* }
            }
        }

        impl GeneratorConfig {
            pub const KEYS: &'static [&'static str] = &[$(stringify!($name)),*];

            fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
                match key {
                    $(stringify!($name) => {
                        self.$name = <$ty as ConfigValue>::parse_value(value)
                            .ok_or_else(|| format!("invalid value `{value}` for `{key}`"))?;
                    })*
                    _ => return Err(format!("unknown key `{key}`")),
                }
                Ok(())
            }

            /// Renders every key, including defaults.
            pub fn to_text(&self) -> String {
                let mut s = String::new();
                $(let _ = writeln!(s, "{} = {}", stringify!($name), self.$name.render());)*
                s
            }
        }
    };
}

generator_config! {
    /// Number of frames in the sequence.
    frames: usize = 20;
    image_width: f64 = 640.0;
    image_height: f64 = 480.0;
    fx: f64 = 500.0;
    fy: f64 = 500.0;
    cx: f64 = 320.0;
    cy: f64 = 240.0;
    baseline: f64 = 0.5;
    /// Points are only observed beyond this depth.
    min_depth: f64 = 1.0;
    static_points: usize = 800;
    world_x_min: f64 = -25.0;
    world_x_max: f64 = 25.0;
    world_y_min: f64 = -6.0;
    world_y_max: f64 = 1.5;
    world_z_min: f64 = 5.0;
    world_z_max: f64 = 80.0;
    /// Camera speed along its heading.
    forward_speed: f64 = 1.0;
    yaw_rate: f64 = 0.01;
    moving_objects: usize = 4;
    /// Target share of visible points that lie on moving objects; also the
    /// dynamic-label share of generated datasets.
    dynamic_fraction: f64 = 0.3;
    object_speed_min: f64 = 0.6;
    object_speed_max: f64 = 1.5;
    /// Largest deviation of an object's heading from the camera's.
    object_heading_spread: f64 = 0.6;
    object_width: f64 = 2.0;
    object_height: f64 = 1.6;
    object_length: f64 = 4.0;
    object_z_min: f64 = 12.0;
    object_z_max: f64 = 35.0;
    object_x_spread: f64 = 6.0;
    /// Share of boxes drawn around static (parked) objects.
    spurious_box_fraction: f64 = 0.2;
    parked_points: usize = 60;
    box_margin: f64 = 8.0;
    pixel_sigma: f64 = 0.3;
    depth_rel_sigma: f64 = 0.01;
    intensity_sigma_static: f64 = 3.0;
    intensity_sigma_dynamic: f64 = 20.0;
    /// Size of the labeled dataset written by `gen`.
    dataset_records: usize = 20000;
}

impl GeneratorConfig {
    pub fn from_text(text: &str) -> Result<Self> {
        Self::from_key_values(parse_key_values(text)?)
    }

    /// Builds a config from `(line, key, value)` triples as returned by
    /// [`parse_key_values`], starting from the defaults.
    pub fn from_key_values<I>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, String, String)>,
    {
        let mut cfg = Self::default();
        for (line, key, value) in pairs {
            cfg.set(&key, &value).map_err(|m| Error::parse(line, m))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn intrinsics(&self) -> Result<CameraIntrinsics> {
        CameraIntrinsics::new(self.fx, self.fy, self.cx, self.cy, self.baseline)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        self.intrinsics()?;
        if self.frames < 2 {
            return fail(format!("need at least 2 frames, got {}", self.frames));
        }
        if !(self.image_width > 0.0 && self.image_height > 0.0) {
            return fail("image size must be positive".into());
        }
        let ranges = [
            ("world_x", self.world_x_min, self.world_x_max),
            ("world_y", self.world_y_min, self.world_y_max),
            ("world_z", self.world_z_min, self.world_z_max),
            ("object_z", self.object_z_min, self.object_z_max),
            ("object_speed", self.object_speed_min, self.object_speed_max),
        ];
        for (name, lo, hi) in ranges {
            if !(lo <= hi) {
                return fail(format!("{name}_min must not exceed {name}_max ({lo} > {hi})"));
            }
        }
        if !(0.0..1.0).contains(&self.dynamic_fraction) {
            return fail(format!("dynamic_fraction must lie in [0, 1), got {}", self.dynamic_fraction));
        }
        if !(0.0..1.0).contains(&self.spurious_box_fraction) {
            return fail(format!(
                "spurious_box_fraction must lie in [0, 1), got {}",
                self.spurious_box_fraction
            ));
        }
        let sigmas = [
            self.pixel_sigma,
            self.depth_rel_sigma,
            self.intensity_sigma_static,
            self.intensity_sigma_dynamic,
        ];
        if sigmas.iter().any(|s| !(*s >= 0.0)) {
            return fail("noise sigmas must be non-negative".into());
        }
        if !(self.min_depth > 0.0) || self.object_speed_min < 0.0 || self.box_margin < 0.0 {
            return fail("min_depth must be positive; speeds and margins non-negative".into());
        }
        if [self.object_width, self.object_height, self.object_length]
            .iter()
            .any(|d| !(*d > 0.0))
        {
            return fail("object dimensions must be positive".into());
        }
        Ok(())
    }

    /// Number of parked (static, boxed) objects implied by the spurious box
    /// share.
    pub fn parked_objects(&self) -> usize {
        let f = self.spurious_box_fraction;
        (self.moving_objects as f64 * f / (1.0 - f)).round() as usize
    }

    /// Same scene without noise.
    pub fn noiseless(mut self) -> Self {
        self.pixel_sigma = 0.0;
        self.depth_rel_sigma = 0.0;
        self.intensity_sigma_static = 0.0;
        self.intensity_sigma_dynamic = 0.0;
        self
    }
}
