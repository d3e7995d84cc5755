use cueval_core::simulation::{setting, SettingId};

use crate::{CliResult, OracleArgs};

pub fn run(args: OracleArgs) -> CliResult<()> {
    let id = SettingId::parse(&args.setting)?;
    let s = setting(id);
    let o = &s.oracle;
    if args.json {
        println!(
            "{}",
            serde_json::json!({
                "setting": id.to_string(),
                "regime": s.regime.id,
                "soc_value": { "exact": o.soc_value.to_string(), "decimal": o.soc_f64() },
                "regime_value": { "exact": o.regime_value.to_string(), "decimal": o.regime_f64() },
                "utility": { "exact": o.utility.to_string(), "decimal": o.utility_f64() },
            })
        );
    } else {
        println!("setting {id} (evaluated regime: {})", s.regime.id);
        println!(
            "  E[Y]      = {:>8}  = {:.6}",
            o.soc_value.to_string(),
            o.soc_f64()
        );
        println!(
            "  E[Y(f)]   = {:>8}  = {:.6}",
            o.regime_value.to_string(),
            o.regime_f64()
        );
        println!(
            "  utility   = {:>8}  = {:.6}",
            o.utility.to_string(),
            o.utility_f64()
        );
    }
    Ok(())
}
