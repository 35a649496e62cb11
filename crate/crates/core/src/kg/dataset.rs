use super::{KgError, Symbols, Triple};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub serial: u32,
    pub triples: BTreeSet<Triple>,
}

/// Ordered sample observations together with the symbol tables they use.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleDataset {
    symbols: Symbols,
    samples: Vec<Sample>,
}

impl SampleDataset {
    /// Validates serial contiguity and non-empty samples; samples are stored
    /// sorted by serial.
    pub fn new(symbols: Symbols, mut samples: Vec<Sample>) -> Result<Self, KgError> {
        if samples.is_empty() {
            return Err(KgError::EmptyDataset);
        }
        samples.sort_by_key(|s| s.serial);
        for (idx, sample) in samples.iter().enumerate() {
            let expected = idx as u32 + 1;
            if sample.serial != expected {
                if idx > 0 && samples[idx - 1].serial == sample.serial {
                    return Err(KgError::DuplicateSerial {
                        line: 0,
                        serial: sample.serial,
                    });
                }
                return Err(KgError::NonContiguousSerials(expected));
            }
            if sample.triples.is_empty() {
                return Err(KgError::EmptySample(sample.serial));
            }
        }
        Ok(Self { symbols, samples })
    }

    /// Builds a dataset from string triples, interning every name.
    pub fn from_named<S>(samples: Vec<(u32, Vec<(S, S, S)>)>) -> Result<Self, KgError>
    where
        S: AsRef<str>,
    {
        let mut entities = BTreeSet::new();
        let mut relations = BTreeSet::new();
        for (_, triples) in &samples {
            for (h, r, t) in triples {
                for name in [h.as_ref(), r.as_ref(), t.as_ref()] {
                    if name.trim().is_empty() {
                        return Err(KgError::Syntax {
                            line: 0,
                            message: "empty identifier".into(),
                        });
                    }
                }
                entities.insert(h.as_ref().to_string());
                entities.insert(t.as_ref().to_string());
                relations.insert(r.as_ref().to_string());
            }
        }
        let symbols = Symbols::from_names(entities, relations);
        let samples = samples
            .into_iter()
            .map(|(serial, triples)| Sample {
                serial,
                triples: triples
                    .iter()
                    .map(|(h, r, t)| {
                        symbols
                            .triple(h.as_ref(), r.as_ref(), t.as_ref())
                            .expect("names were interned above")
                    })
                    .collect(),
            })
            .collect();
        Self::new(symbols, samples)
    }

    /// Parses the line-oriented text format:
    /// `<serial>: (<head>,<relation>,<tail>); (<head>,<relation>,<tail>); ...`
    ///
    /// Blank lines and lines starting with `#` are ignored.
    pub fn parse(text: &str) -> Result<Self, KgError> {
        let mut seen: BTreeMap<u32, usize> = BTreeMap::new();
        let mut raw = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (serial, rest) = trimmed.split_once(':').ok_or_else(|| KgError::Syntax {
                line: line_no,
                message: "expected `<serial>: ...`".into(),
            })?;
            let serial: u32 = serial.trim().parse().map_err(|_| KgError::Syntax {
                line: line_no,
                message: format!("invalid serial `{}`", serial.trim()),
            })?;
            if serial == 0 {
                return Err(KgError::Syntax {
                    line: line_no,
                    message: "serial numbers start at 1".into(),
                });
            }
            if seen.insert(serial, line_no).is_some() {
                return Err(KgError::DuplicateSerial {
                    line: line_no,
                    serial,
                });
            }
            let triples = parse_named_triples(rest, line_no)?;
            if triples.is_empty() {
                return Err(KgError::Syntax {
                    line: line_no,
                    message: format!("sample {serial} has no triples"),
                });
            }
            raw.push((serial, triples));
        }
        Self::from_named(raw)
    }

    /// Inverse of [`SampleDataset::parse`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for sample in &self.samples {
            let rendered: Vec<String> = sample
                .triples
                .iter()
                .map(|t| self.symbols.display(t))
                .collect();
            let _ = writeln!(out, "{}: {}", sample.serial, rendered.join("; "));
        }
        out
    }

    pub fn symbols(&self) -> &Symbols {
        &self.symbols
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

fn parse_named_triples(
    text: &str,
    line_no: usize,
) -> Result<Vec<(String, String, String)>, KgError> {
    let mut out = Vec::new();
    for chunk in text.split(';') {
        let chunk = chunk.trim();
        if chunk.is_empty() {
            continue;
        }
        out.push(parse_named_triple(chunk, line_no)?);
    }
    Ok(out)
}

fn parse_named_triple(chunk: &str, line_no: usize) -> Result<(String, String, String), KgError> {
    let syntax = |message: String| KgError::Syntax {
        line: line_no,
        message,
    };
    let inner = chunk
        .strip_prefix('(')
        .and_then(|c| c.strip_suffix(')'))
        .ok_or_else(|| syntax(format!("expected `(head,relation,tail)`, found `{chunk}`")))?;
    let parts: Vec<&str> = inner.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(syntax(format!("triple `{chunk}` must have three fields")));
    }
    if parts.iter().any(|p| p.is_empty() || p.contains(['(', ')'])) {
        return Err(syntax(format!("invalid identifier in `{chunk}`")));
    }
    Ok((parts[0].into(), parts[1].into(), parts[2].into()))
}

/// Parses a message file: `(h,r,t)` entries separated by `;` or newlines,
/// resolved against an existing symbol table.
pub fn parse_triples(text: &str, symbols: &Symbols) -> Result<Vec<Triple>, KgError> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        for (h, r, t) in parse_named_triples(trimmed, idx + 1)? {
            let triple = symbols.triple(&h, &r, &t).ok_or_else(|| {
                KgError::UnknownSymbol(format!("({h},{r},{t})"))
            })?;
            out.push(triple);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_the_line_format() {
        let ds = SampleDataset::parse(
            "# toy\n1: (h1,r1,t1)\n2: (h1, r1, t1); (h2,r3,t2)\n\n3: (h1,r2,t1);\n",
        )
        .unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.symbols().entity_count(), 4);
        assert_eq!(ds.symbols().relation_count(), 3);
        assert_eq!(ds.samples()[1].triples.len(), 2);
    }

    #[test]
    fn rejects_duplicate_serials_with_line_number() {
        let err = SampleDataset::parse("1: (a,r,b)\n2: (a,r,b)\n2: (a,s,b)\n").unwrap_err();
        assert_eq!(err, KgError::DuplicateSerial { line: 3, serial: 2 });
    }

    #[test]
    fn syntax_errors_report_lines() {
        let err = SampleDataset::parse("1: (a,r,b)\n2: a,r,b\n").unwrap_err();
        assert!(matches!(err, KgError::Syntax { line: 2, .. }), "{err:?}");
        let err = SampleDataset::parse("1: (a,r,b)\nx: (a,r,b)\n").unwrap_err();
        assert!(matches!(err, KgError::Syntax { line: 2, .. }));
        let err = SampleDataset::parse("1: (a,,b)\n").unwrap_err();
        assert!(matches!(err, KgError::Syntax { line: 1, .. }));
    }

    #[test]
    fn serials_must_be_contiguous() {
        let err = SampleDataset::parse("1: (a,r,b)\n3: (a,r,b)\n").unwrap_err();
        assert_eq!(err, KgError::NonContiguousSerials(2));
    }

    #[test]
    fn empty_input_is_empty_dataset() {
        assert_eq!(SampleDataset::parse("# nothing\n").unwrap_err(), KgError::EmptyDataset);
    }

    #[test]
    fn text_round_trip() {
        let text = "1: (h1,r1,t1); (h2,r3,t2)\n2: (h1,r2,t1)\n";
        let ds = SampleDataset::parse(text).unwrap();
        assert_eq!(ds.to_text(), text);
        assert_eq!(SampleDataset::parse(&ds.to_text()).unwrap(), ds);
    }

    #[test]
    fn interning_is_insertion_order_independent() {
        let a = SampleDataset::parse("1: (zeta,r,alpha)\n2: (beta,s,alpha)\n").unwrap();
        let b = SampleDataset::parse("1: (beta,s,alpha)\n2: (zeta,r,alpha)\n").unwrap();
        assert_eq!(a.symbols(), b.symbols());
        assert_eq!(a.symbols().entity("alpha").unwrap().0, 0);
    }

    #[test]
    fn message_files_resolve_against_symbols() {
        let ds = SampleDataset::parse("1: (h1,r1,t1); (h2,r3,t2)\n").unwrap();
        let msg = parse_triples("(h1,r1,t1); (h2,r3,t2)\n(h1,r1,t1)\n", ds.symbols()).unwrap();
        assert_eq!(msg.len(), 3);
        let err = parse_triples("(h1,r9,t1)", ds.symbols()).unwrap_err();
        assert!(matches!(err, KgError::UnknownSymbol(_)));
    }
}
