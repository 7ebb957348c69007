//! Delimited event labels: `filename,onset,offset,label[,confidence]` with
//! commas or tabs, optional header row.

use crate::eval::Event;
use crate::{Error, Result};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone, Default)]
pub struct LabelSet {
    pub by_file: BTreeMap<String, Vec<Event>>,
    /// Sorted distinct labels seen.
    pub classes: Vec<String>,
    /// (line number, reason) for rows skipped in lenient mode.
    pub skipped: Vec<(usize, String)>,
}

fn split_row(line: &str) -> Vec<String> {
    let sep = if line.contains('\t') { '\t' } else { ',' };
    line.split(sep).map(|s| s.trim().to_string()).collect()
}

fn parse_row(fields: &[String]) -> std::result::Result<(String, Event), String> {
    if fields.len() < 4 {
        return Err(format!("expected at least 4 fields, got {}", fields.len()));
    }
    let onset: f64 = fields[1]
        .parse()
        .map_err(|_| format!("bad onset '{}'", fields[1]))?;
    let offset: f64 = fields[2]
        .parse()
        .map_err(|_| format!("bad offset '{}'", fields[2]))?;
    if !(onset < offset) {
        return Err(format!("onset {onset} not before offset {offset}"));
    }
    if onset < 0.0 {
        return Err(format!("negative onset {onset}"));
    }
    let confidence = if fields.len() >= 5 && !fields[4].is_empty() {
        let c: f64 = fields[4]
            .parse()
            .map_err(|_| format!("bad confidence '{}'", fields[4]))?;
        if !(0.0..=1.0).contains(&c) {
            return Err(format!("confidence {c} outside [0, 1]"));
        }
        c
    } else {
        1.0
    };
    if fields[3].is_empty() {
        return Err("empty class label".into());
    }
    Ok((
        fields[0].clone(),
        Event {
            onset_s: onset,
            offset_s: offset,
            label: fields[3].clone(),
            confidence,
        },
    ))
}

/// Parse a label file. Strict mode fails on the first malformed row (with
/// its line number); lenient mode skips malformed rows and records them.
pub fn parse_labels(path: &Path, strict: bool) -> Result<LabelSet> {
    let text = std::fs::read_to_string(path)?;
    let mut set = LabelSet::default();
    let mut classes = std::collections::BTreeSet::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields = split_row(line);
        // optional header: first row whose onset field is not numeric
        if idx == 0 && fields.len() >= 2 && fields[1].parse::<f64>().is_err() {
            continue;
        }
        match parse_row(&fields) {
            Ok((file, event)) => {
                classes.insert(event.label.clone());
                set.by_file.entry(file).or_default().push(event);
            }
            Err(msg) => {
                if strict {
                    return Err(Error::LabelParse { line: line_no, msg });
                }
                set.skipped.push((line_no, msg));
            }
        }
    }
    set.classes = classes.into_iter().collect();
    Ok(set)
}

/// Write labels as CSV with six-decimal times, header included.
pub fn write_labels(path: &Path, by_file: &BTreeMap<String, Vec<Event>>) -> Result<()> {
    let mut out = String::from("filename,onset,offset,label,confidence\n");
    for (file, events) in by_file {
        for ev in events {
            out.push_str(&format!(
                "{file},{:.6},{:.6},{},{:.6}\n",
                ev.onset_s, ev.offset_s, ev.label, ev.confidence
            ));
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("strfsed_label_tests");
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn default_confidence_and_vocabulary() {
        let path = tmp("basic.csv");
        std::fs::write(&path, "a.wav,0.0,1.5,dog\nb.wav,2.0,3.0,cat\nc.wav,0.5,1.0,dog\n")
            .unwrap();
        let set = parse_labels(&path, true).unwrap();
        assert_eq!(set.by_file.len(), 3);
        assert_eq!(set.by_file["a.wav"][0].confidence, 1.0);
        assert_eq!(set.classes, vec!["cat".to_string(), "dog".to_string()]);
    }

    #[test]
    fn tabs_and_header_accepted() {
        let path = tmp("tabs.tsv");
        std::fs::write(
            &path,
            "filename\tonset\toffset\tlabel\tconfidence\nx.wav\t0.5\t2.5\tbark\t0.75\n",
        )
        .unwrap();
        let set = parse_labels(&path, true).unwrap();
        assert_eq!(set.by_file["x.wav"][0].confidence, 0.75);
    }

    #[test]
    fn bad_interval_names_the_line() {
        let path = tmp("bad.csv");
        std::fs::write(&path, "a.wav,0.0,1.0,dog\na.wav,2.0,1.5,dog\n").unwrap();
        match parse_labels(&path, true) {
            Err(Error::LabelParse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected LabelParse, got {other:?}"),
        }
        // lenient mode skips and records it
        let set = parse_labels(&path, false).unwrap();
        assert_eq!(set.by_file["a.wav"].len(), 1);
        assert_eq!(set.skipped.len(), 1);
        assert_eq!(set.skipped[0].0, 2);
    }

    #[test]
    fn round_trip_preserves_events() {
        let path = tmp("rt.csv");
        let mut by_file: BTreeMap<String, Vec<Event>> = BTreeMap::new();
        by_file.insert(
            "clip_7".into(),
            vec![
                Event {
                    onset_s: 1.234567,
                    offset_s: 4.5,
                    label: "mid".into(),
                    confidence: 0.9,
                },
                Event {
                    onset_s: 10.0,
                    offset_s: 12.25,
                    label: "low".into(),
                    confidence: 1.0,
                },
            ],
        );
        write_labels(&path, &by_file).unwrap();
        let set = parse_labels(&path, true).unwrap();
        let evs = &set.by_file["clip_7"];
        assert_eq!(evs.len(), 2);
        assert!((evs[0].onset_s - 1.234567).abs() < 1e-6);
        assert!((evs[0].offset_s - 4.5).abs() < 1e-6);
        assert_eq!(evs[0].label, "mid");
        assert!((evs[0].confidence - 0.9).abs() < 1e-6);
    }
}
