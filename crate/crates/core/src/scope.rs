//! Four-way scoping labels and window decoding.

use serde::{Deserialize, Serialize};

use crate::error::NtpError;

/// Windows are inclusive `[start, end]` frame indices.
pub type Window = (usize, usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Start,
    End,
    Inside,
    Outside,
}

pub const NUM_LABELS: usize = 4;

impl Label {
    pub fn index(self) -> usize {
        self as usize
    }
}

/// Labels over `parent` marking where `child` sits.
pub fn labels_for(parent: Window, child: Window) -> Result<Vec<Label>, NtpError> {
    if parent.1 < parent.0 || child.1 < child.0 {
        return Err(NtpError::Parse(format!("empty window {parent:?} or {child:?}")));
    }
    if child.0 < parent.0 || child.1 > parent.1 {
        return Err(NtpError::Parse(format!("window {child:?} not inside {parent:?}")));
    }
    Ok((parent.0..=parent.1)
        .map(|j| match j {
            j if j == child.0 => Label::Start,
            j if j == child.1 => Label::End,
            j if j > child.0 && j < child.1 => Label::Inside,
            _ => Label::Outside,
        })
        .collect())
}

/// Soft training targets. A one-frame window carries its single frame as
/// both Start and End, so the mass is split between the two.
pub fn label_targets(labels: &[Label]) -> Vec<[f64; NUM_LABELS]> {
    let single = labels.iter().filter(|l| **l == Label::End).count() == 0;
    labels
        .iter()
        .map(|l| {
            let mut t = [0.0; NUM_LABELS];
            if single && *l == Label::Start {
                t[Label::Start.index()] = 0.5;
                t[Label::End.index()] = 0.5;
            } else {
                t[l.index()] = 1.0;
            }
            t
        })
        .collect()
}

/// Argmax of Start and of End over the window (ties to the earliest frame),
/// clamped so the end never precedes the start. Always yields a valid
/// non-empty sub-window.
pub fn decode_scope(probs: &[[f64; NUM_LABELS]]) -> Window {
    assert!(!probs.is_empty(), "cannot decode an empty window");
    let best = |k: usize| {
        let mut arg = 0;
        for (j, p) in probs.iter().enumerate() {
            if p[k] > probs[arg][k] {
                arg = j;
            }
        }
        arg
    };
    let st = best(Label::Start.index());
    let ed = best(Label::End.index()).max(st);
    (st, ed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::*;

    fn one_hot(labels: &[Label]) -> Vec<[f64; NUM_LABELS]> {
        labels.iter().map(|l| std::array::from_fn(|k| if k == l.index() { 1.0 } else { 0.0 })).collect()
    }

    #[test]
    fn full_window() {
        assert_eq!(labels_for((0, 4), (0, 4)).unwrap(), vec![Start, Inside, Inside, Inside, End]);
    }

    #[test]
    fn single_frame_window_is_start() {
        let l = labels_for((1, 5), (3, 3)).unwrap();
        assert_eq!(l, vec![Outside, Outside, Start, Outside, Outside]);
        assert_eq!(decode_scope(&label_targets(&l)), (2, 2));
        assert_eq!(decode_scope(&one_hot(&l)), (2, 2));
    }

    #[test]
    fn round_trip() {
        let l = labels_for((2, 9), (4, 7)).unwrap();
        assert_eq!(decode_scope(&label_targets(&l)), (2, 5));
    }

    #[test]
    fn invalid_windows() {
        assert!(labels_for((0, 4), (3, 2)).is_err());
        assert!(labels_for((1, 4), (0, 2)).is_err());
    }

    #[test]
    fn inverted_argmax_is_clamped() {
        let probs = [[0.1, 0.9, 0.0, 0.0], [0.9, 0.1, 0.0, 0.0]];
        assert_eq!(decode_scope(&probs), (1, 1));
    }
}
