//! Plain-text tables and JSON printing.

use serde_json::Value;

/// Renders a value for a table cell: strings bare, null empty, others as JSON.
pub fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

pub fn table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = headers.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        padded.join("  ").trim_end().to_string()
    };
    let mut out = vec![line(headers.to_vec())];
    out.extend(rows.iter().map(|r| line(r.iter().map(String::as_str).collect())));
    out.join("\n")
}

/// Rows of `fields` pulled from each object in `items`.
pub fn rows(items: &[Value], fields: &[&str]) -> Vec<Vec<String>> {
    items
        .iter()
        .map(|item| fields.iter().map(|f| cell(&item[*f])).collect())
        .collect()
}

/// `key  value` lines for the listed fields that are present.
pub fn record(v: &Value, fields: &[&str]) -> String {
    let present: Vec<Vec<String>> = fields
        .iter()
        .filter(|f| !v[**f].is_null())
        .map(|f| vec![f.to_string(), cell(&v[*f])])
        .collect();
    table(&["FIELD", "VALUE"], &present)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn columns_align() {
        let t = table(&["A", "LONGER"], &[vec!["xyz".into(), "1".into()]]);
        assert_eq!(t, "A    LONGER\nxyz  1");
    }

    #[test]
    fn cells_render_by_type() {
        assert_eq!(cell(&json!(null)), "");
        assert_eq!(cell(&json!("s")), "s");
        assert_eq!(cell(&json!({"00": 1})), "{\"00\":1}");
    }
}
