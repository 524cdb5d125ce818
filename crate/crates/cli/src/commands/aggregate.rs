use std::fs;

use ndarray::Array2;

use mirkit::metrics::{aggregate_chunks, Aggregated, Aggregation};

use crate::error::{CliResult, Failure};
use crate::formats::ScoreCsv;
use crate::{AggregateArgs, AggregateMethod};

/// Splits `<track>#<k>` into the track id and chunk index.
pub fn parse_chunk_id(id: &str) -> Result<(&str, usize), String> {
    let (track, k) = id
        .rsplit_once('#')
        .ok_or_else(|| format!("chunk id {id:?} lacks a #<k> suffix"))?;
    if track.is_empty() {
        return Err(format!("chunk id {id:?} has an empty track"));
    }
    let k = k
        .parse()
        .map_err(|_| format!("chunk id {id:?} has a non-integer chunk index"))?;
    Ok((track, k))
}

/// Track-level scores, tracks in order of first appearance. Majority voting
/// yields a one-hot row.
pub fn aggregate(chunks: &ScoreCsv, method: AggregateMethod) -> Result<ScoreCsv, String> {
    let mut tracks: Vec<String> = Vec::new();
    let mut rows: Vec<Vec<usize>> = Vec::new();
    for (r, id) in chunks.ids.iter().enumerate() {
        let (track, _) = parse_chunk_id(id)?;
        match tracks.iter().position(|t| t == track) {
            Some(i) => rows[i].push(r),
            None => {
                tracks.push(track.to_string());
                rows.push(vec![r]);
            }
        }
    }
    let method = match method {
        AggregateMethod::Mean => Aggregation::Mean,
        AggregateMethod::Max => Aggregation::Max,
        AggregateMethod::Majority => Aggregation::Majority,
    };
    let n_classes = chunks.classes.len();
    let mut values = Array2::<f32>::zeros((tracks.len(), n_classes));
    for (t, members) in rows.iter().enumerate() {
        let sub = chunks.values.select(ndarray::Axis(0), members);
        match aggregate_chunks(sub.view(), method).map_err(|e| e.to_string())? {
            Aggregated::Scores(s) => {
                for (c, v) in s.into_iter().enumerate() {
                    values[[t, c]] = v;
                }
            }
            Aggregated::Class(c) => values[[t, c]] = 1.0,
        }
    }
    Ok(ScoreCsv {
        classes: chunks.classes.clone(),
        ids: tracks,
        values,
    })
}

pub fn run(a: &AggregateArgs) -> CliResult<()> {
    let chunks = ScoreCsv::read(&a.scores)?;
    let out = aggregate(&chunks, a.method).map_err(|e| Failure::parse(&a.scores, e))?;
    fs::write(&a.out, out.render()).map_err(|e| Failure::io(&a.out, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunk_ids() {
        assert_eq!(parse_chunk_id("song#3").unwrap(), ("song", 3));
        assert_eq!(parse_chunk_id("a#b#0").unwrap(), ("a#b", 0));
        assert!(parse_chunk_id("song").is_err());
        assert!(parse_chunk_id("song#x").is_err());
        assert!(parse_chunk_id("#1").is_err());
    }

    #[test]
    fn mean_of_two_chunks() {
        let s = ScoreCsv::parse("id,a,b\nt#0,0,1\nt#1,1,0\n").unwrap();
        let out = aggregate(&s, AggregateMethod::Mean).unwrap();
        assert_eq!(out.ids, vec!["t"]);
        assert_eq!(out.values.row(0).to_vec(), vec![0.5, 0.5]);
    }
}
