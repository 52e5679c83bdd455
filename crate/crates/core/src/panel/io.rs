use std::collections::HashMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use super::{MonthId, ReturnPanel, StockObservation};
use crate::{Error, Result};

pub const PANEL_HEADER: [&str; 6] = [
    "stock_id",
    "month",
    "excess_return",
    "market_cap",
    "price",
    "sic",
];

pub(crate) fn open_csv(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

/// Maps required column names to their positions, rejecting unknown or
/// duplicated columns.
pub(crate) fn header_positions(
    path: &Path,
    reader: &mut csv::Reader<File>,
    required: &[&str],
    optional: &[&str],
) -> Result<HashMap<String, usize>> {
    let header = reader.headers().map_err(|e| Error::Header {
        path: path.into(),
        message: e.to_string(),
    })?;
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(Error::Header {
            path: path.into(),
            message: "empty header".into(),
        });
    }
    let mut pos = HashMap::new();
    for (i, name) in header.iter().enumerate() {
        if !required.contains(&name) && !optional.contains(&name) {
            return Err(Error::Header {
                path: path.into(),
                message: format!("unknown column `{name}`"),
            });
        }
        if pos.insert(name.to_string(), i).is_some() {
            return Err(Error::Header {
                path: path.into(),
                message: format!("duplicate column `{name}`"),
            });
        }
    }
    if let Some(missing) = required.iter().find(|c| !pos.contains_key(**c)) {
        return Err(Error::Header {
            path: path.into(),
            message: format!("missing column `{missing}`"),
        });
    }
    Ok(pos)
}

pub(crate) fn parse_f64(field: &str, name: &str) -> std::result::Result<f64, String> {
    let v: f64 = field
        .parse()
        .map_err(|_| format!("{name}: cannot parse `{field}` as a number"))?;
    if !v.is_finite() {
        return Err(format!("{name}: non-finite value `{field}`"));
    }
    Ok(v)
}

fn parse_optional(field: &str, name: &str) -> std::result::Result<Option<f64>, String> {
    if field.is_empty() {
        Ok(None)
    } else {
        parse_f64(field, name).map(Some)
    }
}

/// Reads a panel CSV (`stock_id,month,excess_return,market_cap,price,sic`).
///
/// Row numbers in diagnostics are 1-based file lines (the header is line 1).
pub fn load_panel(path: impl AsRef<Path>) -> Result<ReturnPanel> {
    let path = path.as_ref();
    let mut reader = open_csv(path)?;
    let pos = header_positions(path, &mut reader, &PANEL_HEADER, &[])?;
    let col = |n: &str| pos[n];
    let mut seen: HashMap<(String, MonthId), usize> = HashMap::new();
    let mut observations = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| Error::Row {
            path: path.into(),
            row,
            message: e.to_string(),
        })?;
        let obs = parse_panel_row(&record, &col).map_err(|message| Error::Row {
            path: path.into(),
            row,
            message,
        })?;
        if let Some(first) = seen.insert((obs.stock_id.to_string(), obs.month), row) {
            return Err(Error::DuplicateKey {
                path: path.into(),
                row,
                stock_id: format!("{} (first seen on row {first})", obs.stock_id),
                month: obs.month.to_string(),
            });
        }
        observations.push(obs);
    }
    ReturnPanel::new(observations)
}

fn parse_panel_row(
    record: &csv::StringRecord,
    col: &dyn Fn(&str) -> usize,
) -> std::result::Result<StockObservation, String> {
    let field = |n: &str| record.get(col(n)).unwrap_or("");
    let stock_id = field("stock_id");
    if stock_id.is_empty() {
        return Err("stock_id is empty".into());
    }
    let month: MonthId = field("month").parse().map_err(|e: Error| e.to_string())?;
    let mut obs = StockObservation::new(stock_id, month, parse_f64(field("excess_return"), "excess_return")?);
    obs.market_cap = parse_optional(field("market_cap"), "market_cap")?;
    obs.price = parse_optional(field("price"), "price")?;
    let sic = field("sic");
    if !sic.is_empty() {
        let code: u16 = sic
            .parse()
            .map_err(|_| format!("sic: cannot parse `{sic}` as an integer"))?;
        if code > 9999 {
            return Err(format!("sic: `{sic}` has more than 4 digits"));
        }
        obs.sic = Some(code);
    }
    obs.validate()?;
    Ok(obs)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes a panel in the loader's schema; values round-trip exactly.
pub fn write_panel(panel: &ReturnPanel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = std::io::BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    let mut text = PANEL_HEADER.join(",");
    text.push('\n');
    for o in panel.observations() {
        text.push_str(&format!(
            "{},{},{},{},{},{}\n",
            o.stock_id,
            o.month,
            o.excess_return,
            opt(o.market_cap),
            opt(o.price),
            o.sic.map(|s| s.to_string()).unwrap_or_default()
        ));
    }
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        std::fs::File::create(&p).unwrap().write_all(body.as_bytes()).unwrap();
        p
    }

    #[test]
    fn loads_three_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "p.csv",
            "stock_id,month,excess_return,market_cap,price,sic\n\
             A,200001,0.01,100,10,3571\n\
             B,200001,-0.02,,5.5,\n\
             A,200002,0.03,110,11,3571\n",
        );
        let panel = load_panel(&p).unwrap();
        assert_eq!(panel.len(), 3);
        let b = &panel.month(MonthId::from_yyyymm(200001).unwrap())[1];
        assert_eq!(&*b.stock_id, "B");
        assert_eq!(b.market_cap, None);
        assert_eq!(b.sic, None);
    }

    #[test]
    fn duplicate_key_names_row() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "p.csv",
            "stock_id,month,excess_return,market_cap,price,sic\n\
             A,200001,0.01,100,10,3571\n\
             A,200001,0.02,100,10,3571\n",
        );
        match load_panel(&p) {
            Err(Error::DuplicateKey { row, .. }) => assert_eq!(row, 3),
            other => panic!("expected duplicate-key error, got {other:?}"),
        }
    }

    #[test]
    fn header_only_is_empty_panel() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "p.csv", "stock_id,month,excess_return,market_cap,price,sic\n");
        let panel = load_panel(&p).unwrap();
        assert!(panel.is_empty());
        assert_eq!(panel.month_range(), None);
    }

    #[test]
    fn malformed_inputs() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_panel(dir.path().join("missing.csv")),
            Err(Error::Io { .. })
        ));
        let p = write(&dir, "h.csv", "stock_id,month,ret\nA,200001,0.1\n");
        assert!(matches!(load_panel(&p), Err(Error::Header { .. })));
        let p = write(
            &dir,
            "n.csv",
            "stock_id,month,excess_return,market_cap,price,sic\nA,200001,inf,1,1,\n",
        );
        match load_panel(&p) {
            Err(Error::Row { row, .. }) => assert_eq!(row, 2),
            other => panic!("expected row error, got {other:?}"),
        }
    }
}
