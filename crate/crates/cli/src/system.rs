//! Spin-system presets from the command line.

use spinbath_core::spinsys::{HyperfineTensor, SpinSystemSpec, ZeemanField};

use crate::error::{CliError, CliResult};

/// Comma-separated nuclei: `fs0`..`fs2` (first-shell site), `third`
/// (third-shell contact site), `iso:<MHz>`, `axial:<A_par>:<A_perp>:<polar
/// deg>[:<azimuth deg>]`; `none` or empty for a bare NV.
pub fn parse_nuclei(list: &str) -> CliResult<Vec<HyperfineTensor>> {
    let list = list.trim();
    if list.is_empty() || list == "none" {
        return Ok(Vec::new());
    }
    list.split(',')
        .map(|tok| {
            let tok = tok.trim();
            let bad = || CliError::Config(format!("bad nucleus {tok:?}"));
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
            let parts: Vec<&str> = tok.split(':').collect();
            match parts.as_slice() {
                ["third"] => Ok(HyperfineTensor::third_shell()),
                [fs] if fs.starts_with("fs") => {
                    let k: usize = fs[2..].parse().map_err(|_| bad())?;
                    if k > 2 {
                        return Err(CliError::Config(format!("first shell has sites fs0..fs2, got {tok:?}")));
                    }
                    Ok(HyperfineTensor::first_shell(k))
                }
                ["iso", a] => Ok(HyperfineTensor::isotropic(num(a)?)),
                ["axial", par, perp, polar] => Ok(HyperfineTensor {
                    a_par_mhz: num(par)?,
                    a_perp_mhz: num(perp)?,
                    polar_deg: num(polar)?,
                    azimuth_deg: 0.0,
                }),
                ["axial", par, perp, polar, az] => Ok(HyperfineTensor {
                    a_par_mhz: num(par)?,
                    a_perp_mhz: num(perp)?,
                    polar_deg: num(polar)?,
                    azimuth_deg: num(az)?,
                }),
                _ => Err(bad()),
            }
        })
        .collect()
}

pub fn build_spec(nuclei: &str, field_gauss: Option<f64>, d_mhz: Option<f64>) -> CliResult<SpinSystemSpec> {
    let mut spec = SpinSystemSpec::with_nuclei(parse_nuclei(nuclei)?);
    if let Some(b) = field_gauss {
        spec.field = ZeemanField::along_nv(b);
    }
    if let Some(d) = d_mhz {
        spec.zfs.d_mhz = d;
    }
    spec.validate()?;
    Ok(spec)
}
