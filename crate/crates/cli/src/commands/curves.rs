use dmpart_core::demand::{default_horizon, write_dbf_csv};
use dmpart_core::rational::{self, int, ratio};
use dmpart_core::tightness::{grid, tight_f, write_dbf_sharp_csv, write_ratio_csv};
use dmpart_core::Rational;
use num_traits::ToPrimitive;

use super::{output, read_document, CliError, CliResult, Status};
use crate::args::{Curve, CurvesArgs};

fn integer(r: &Rational, flag: &str) -> CliResult<u64> {
    if !r.is_integer() {
        return Err(CliError::Input(format!("--{flag} must be an integer, got {}", rational::format(r))));
    }
    r.to_integer()
        .to_u64()
        .ok_or_else(|| CliError::Input(format!("--{flag} out of range: {}", rational::format(r))))
}

pub fn run(args: &CurvesArgs) -> CliResult {
    let out = output(args.out.as_deref())?;
    match args.what {
        Curve::Dbf => {
            let path = args
                .input
                .as_ref()
                .ok_or_else(|| CliError::Usage("--what dbf needs --input".into()))?;
            let ts = read_document(path)?.to_task_set()?;
            let horizon = args.to.clone().unwrap_or_else(|| default_horizon(&ts));
            write_dbf_csv(out, &ts, &horizon)?;
        }
        Curve::DbfSharp | Curve::DbfSharpRatio => {
            let from = args.from.clone().unwrap_or_else(|| int(1));
            let to = args.to.clone().unwrap_or_else(|| int(6));
            let step = args.step.clone().unwrap_or_else(|| ratio(1, 100));
            let ts = grid(rational::to_f64(&from), rational::to_f64(&to), rational::to_f64(&step))?;
            write_dbf_sharp_csv(out, &ts, tight_f(), args.what == Curve::DbfSharpRatio)?;
        }
        Curve::Ratio => {
            let from = integer(&args.from.clone().unwrap_or_else(|| int(1)), "from")?;
            let to = integer(&args.to.clone().unwrap_or_else(|| int(4000)), "to")?;
            write_ratio_csv(out, from, to, tight_f())?;
        }
    }
    Ok(Status::Ok)
}
