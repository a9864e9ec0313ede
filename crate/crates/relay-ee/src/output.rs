//! CSV writing. A `#` header records the build, the study, every resolved
//! config field and the summary results; the body is plain CSV.

use std::io::Write;

use crate::config::StudyConfig;
use crate::studies::StudyOutput;
use crate::{CliError, VERSION};

pub fn header_lines(out: &StudyOutput, cfg: &StudyConfig) -> Vec<String> {
    let mut lines = vec![
        format!("relay-ee {VERSION}"),
        format!("study = {}", out.study),
        format!("methods = {}", out.methods),
    ];
    lines.extend(
        cfg.resolved_lines()
            .into_iter()
            .map(|l| format!("config: {l}")),
    );
    lines.extend(
        out.result_lines()
            .into_iter()
            .map(|l| format!("result: {l}")),
    );
    lines
}

pub fn write_csv<W: Write>(mut w: W, out: &StudyOutput, cfg: &StudyConfig) -> Result<(), CliError> {
    for line in header_lines(out, cfg) {
        writeln!(w, "# {line}")?;
    }
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(&out.table.columns)?;
    for row in &out.table.rows {
        csv.write_record(row.iter().map(|c| c.render()))?;
    }
    csv.flush()?;
    Ok(())
}

/// The CSV body without `#` lines.
pub fn body(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RawConfig;
    use crate::studies::{run_pmf_dump, Cell};

    #[test]
    fn header_then_body() {
        let cfg = RawConfig::from_toml_str("rho = 1")
            .unwrap()
            .resolve()
            .unwrap();
        let out = run_pmf_dump(&cfg).unwrap();
        let mut buf = Vec::new();
        write_csv(&mut buf, &out, &cfg).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# relay-ee "));
        assert!(text.contains("# config: "));
        let b = body(&text);
        assert!(b.starts_with("i,p_unc,p_ur,p_uc\n"));
        assert_eq!(b.lines().count(), out.table.rows.len() + 1);
    }

    #[test]
    fn cells_render() {
        assert_eq!(Cell::Num(0.25).render(), "0.25");
        assert_eq!(Cell::Empty.render(), "");
        assert_eq!(Cell::Text("mc").render(), "mc");
    }
}
