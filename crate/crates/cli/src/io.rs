//! File I/O with schema validation on load.

use std::fs;
use std::path::Path;

use mechlab_core::instances::Instance;
use mechlab_core::mechanisms::{MechanismSpec, Outcome, PostedPriceSpec, SinglePriceSpec};
use mechlab_core::menus::Menu;
use mechlab_core::shattering::AllocationFamily;

use crate::{CliError, CliResult};

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))
}

fn parse<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> CliResult<T> {
    serde_json::from_str(&read(path)?)
        .map_err(|e| CliError::usage(format!("{what} {}: {e}", path.display())))
}

pub fn load_instance(path: &Path) -> CliResult<Instance> {
    let inst: Instance = parse(path, "malformed instance")?;
    inst.validate()
        .map_err(|e| CliError::usage(format!("invalid instance {}: {e}", path.display())))?;
    Ok(inst)
}

pub fn load_outcome(path: &Path) -> CliResult<Outcome> {
    let out: Outcome = parse(path, "malformed outcome")?;
    out.validate_structure()
        .map_err(|e| CliError::usage(format!("invalid outcome {}: {e}", path.display())))?;
    if out.payments.len() != out.allocation.len() {
        return Err(CliError::usage(format!(
            "invalid outcome {}: payment/allocation shape mismatch",
            path.display()
        )));
    }
    Ok(out)
}

pub fn load_family(path: &Path) -> CliResult<AllocationFamily> {
    let fam: AllocationFamily = parse(path, "malformed allocation family")?;
    // Rebuild through the validating constructor (duplication bound,
    // canonical order).
    AllocationFamily::new(fam.x_size, fam.y_size, fam.d, fam.members().to_vec())
        .map_err(|e| CliError::usage(format!("invalid family {}: {e}", path.display())))
}

pub fn load_mechanism(path: &Path) -> CliResult<MechanismSpec> {
    parse(path, "malformed mechanism spec")
}

pub fn load_single_price_spec(path: &Path) -> CliResult<SinglePriceSpec> {
    parse(path, "malformed single-price spec")
}

pub fn load_posted_price_spec(path: &Path) -> CliResult<PostedPriceSpec> {
    parse(path, "malformed posted-price spec")
}

pub fn load_menu(path: &Path) -> CliResult<Menu> {
    parse(path, "malformed menu")
}

/// Serializes to pretty JSON with a trailing newline; byte-stable across
/// reruns (struct field order, ordered maps).
pub fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

/// Writes to the given path, or stdout when `path` is `None`.
pub fn emit(path: Option<&Path>, content: &str) -> CliResult<()> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent() {
                if !dir.as_os_str().is_empty() {
                    fs::create_dir_all(dir)?;
                }
            }
            fs::write(p, content)?;
            Ok(())
        }
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use mechlab_core::money::Money;
    use mechlab_core::valuations::Valuation;
    use std::io::Write;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn instance_round_trip_is_byte_identical() {
        let inst = mechlab_core::instances::gen_bucket(
            &mechlab_core::instances::BucketParams::new(3, 3, 3).unwrap(),
        );
        let json = to_json(&inst);
        let f = write_temp(&json);
        let back = load_instance(f.path()).unwrap();
        assert_eq!(back, inst);
        assert_eq!(to_json(&back), json);
    }

    #[test]
    fn malformed_rational_rejected() {
        let f = write_temp(r#"{"n":1,"m":1,"valuations":[{"type":"additive","values":["1/0"]}]}"#);
        let err = load_instance(f.path()).unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn overlapping_outcome_rejected_on_load() {
        let f = write_temp(
            r#"{"allocation":[[0,1],[1]],"payments":[0,0],"welfare":3}"#,
        );
        let err = load_outcome(f.path()).unwrap_err();
        assert!(err.to_string().contains("allocated twice"), "{err}");
    }

    #[test]
    fn valid_outcome_loads() {
        let inst = Instance::new(vec![Valuation::Additive {
            values: vec![Money::from_int(2), Money::from_int(1)],
        }])
        .unwrap();
        let out = mechlab_core::mechanisms::run_single_bid(&[Money::ZERO], &inst).unwrap();
        let f = write_temp(&to_json(&out));
        assert_eq!(load_outcome(f.path()).unwrap(), out);
    }

    #[test]
    fn family_reload_canonicalizes() {
        let fam = AllocationFamily::full(2, 2).unwrap();
        let f = write_temp(&to_json(&fam));
        assert_eq!(load_family(f.path()).unwrap(), fam);
    }
}
