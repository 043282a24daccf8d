//! Study-level report: questionnaire intercorrelations, EEG/efficacy
//! correlations, single-trial classification grid and lateralization changes.
//!
//! Session summaries come straight from the event log, so no model needs to be
//! rebuilt to analyze a study.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::classify::{loocv_f1, Average, ClassifierSpec, CvConfig, Label, LabeledTrial, SvmConfig};
use super::stats::{mean, pearson_matrix, spearman_fisher, two_sample_t, variance, PearsonMatrix, TTest};
use crate::eeg::{lateralized_power_change, Band, FeatureKind, TrialFeatures};
use crate::efficacy::{satisfaction_count, understanding_score, EfficacyScore, QuizItem, SatisfactionMark};
use crate::error::{Error, Result};
use crate::session::{Event, Group, LogRecord, SelfAssessment};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub efficacy: EfficacyScore,
    pub assessment: Option<SelfAssessment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub session: String,
    pub group: Group,
    pub trials: Vec<TrialSummary>,
}

impl SessionSummary {
    pub fn trial(&self, t: u32) -> Option<&TrialSummary> {
        self.trials.iter().find(|s| s.efficacy.trial == t)
    }
}

/// Per-trial ξ and self-assessment, recomputed from the logged marks and
/// scored quizzes.
pub fn summarize_log(records: &[LogRecord]) -> Result<SessionSummary> {
    let first = records.first().ok_or(Error::Empty("session log"))?;
    let Event::Created(created) = &first.event else {
        return Err(Error::Replay("log does not start with a created event".into()));
    };
    #[derive(Default)]
    struct Acc {
        marks: Vec<SatisfactionMark>,
        quiz: Option<Vec<QuizItem>>,
        assessment: Option<SelfAssessment>,
    }
    let mut trials: BTreeMap<u32, Acc> = BTreeMap::new();
    for r in records {
        if r.session != first.session {
            return Err(Error::Replay(format!("record for session {} in log of {}", r.session, first.session)));
        }
        match &r.event {
            Event::Recommended { trial, .. } => {
                trials.entry(*trial).or_default();
            }
            Event::Satisfaction { marks } => trials.entry(r.trial).or_default().marks.extend_from_slice(marks),
            Event::Quiz { scored, .. } => trials.entry(r.trial).or_default().quiz = Some(scored.clone()),
            Event::Assessment(a) => trials.entry(r.trial).or_default().assessment = Some(*a),
            _ => {}
        }
    }
    let trials = trials
        .into_iter()
        .map(|(t, acc)| {
            let x = match &acc.quiz {
                Some(q) if !q.is_empty() => understanding_score(q)?,
                _ => 0.0,
            };
            let a = satisfaction_count(&acc.marks);
            Ok(TrialSummary {
                efficacy: EfficacyScore::compute(t, a, x, created.config.k, created.config.mode)?,
                assessment: acc.assessment,
            })
        })
        .collect::<Result<_>>()?;
    Ok(SessionSummary {
        session: first.session.clone(),
        group: created.group,
        trials,
    })
}

/// A session's per-trial EEG features, ordered by trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEeg {
    pub session: String,
    pub trials: Vec<TrialFeatures>,
}

pub const SCALES: [&str; 7] = ["xi", "M", "E", "P", "F", "V", "D"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMatrix {
    pub group: Group,
    pub n: usize,
    pub matrix: Option<PearsonMatrix>,
}

/// Questionnaire intercorrelations per group over all assessed trials.
pub fn questionnaire_matrices(sessions: &[SessionSummary], alpha: f64) -> Result<Vec<GroupMatrix>> {
    [Group::Feedback, Group::NonFeedback]
        .into_iter()
        .map(|group| {
            let mut cols = vec![Vec::new(); SCALES.len()];
            for s in sessions.iter().filter(|s| s.group == group) {
                for t in &s.trials {
                    let Some(a) = t.assessment else { continue };
                    let row = [
                        t.efficacy.xi,
                        a.mental_demand,
                        a.effort,
                        a.performance,
                        a.frustration,
                        a.valence,
                        a.dominance,
                    ];
                    for (c, v) in cols.iter_mut().zip(row) {
                        c.push(v);
                    }
                }
            }
            let n = cols[0].len();
            let matrix = if n >= 3 {
                Some(pearson_matrix(&SCALES, &cols, alpha)?)
            } else {
                None
            };
            Ok(GroupMatrix { group, n, matrix })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElectrodeCorrelation {
    pub electrode: String,
    pub band: Band,
    pub r_mean: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub combined_p: f64,
    pub subjects: usize,
}

/// Subject-wise Spearman correlation of band power with ξ across trials,
/// combined over subjects with Fisher's method.
pub fn efficacy_correlations(sessions: &[SessionSummary], eeg: &[SessionEeg]) -> Result<Vec<ElectrodeCorrelation>> {
    let by_id: BTreeMap<&str, &SessionSummary> = sessions.iter().map(|s| (s.session.as_str(), s)).collect();
    let mut electrodes: Vec<String> = Vec::new();
    for e in eeg {
        for f in e.trials.iter().flat_map(|t| &t.electrodes) {
            if !electrodes.contains(&f.channel) {
                electrodes.push(f.channel.clone());
            }
        }
    }
    let mut rows = Vec::new();
    for band in Band::ALL {
        for ch in &electrodes {
            let mut subjects = Vec::new();
            for e in eeg {
                let Some(summary) = by_id.get(e.session.as_str()) else { continue };
                let (mut x, mut y) = (Vec::new(), Vec::new());
                for t in &e.trials {
                    if let (Some(f), Some(s)) = (t.electrode(band, ch), summary.trial(t.trial)) {
                        x.push(f.power);
                        y.push(s.efficacy.xi);
                    }
                }
                if x.len() >= 3 {
                    subjects.push((x, y));
                }
            }
            if subjects.is_empty() {
                continue;
            }
            if let Some(row) = spearman_fisher(&subjects)? {
                rows.push(ElectrodeCorrelation {
                    electrode: ch.clone(),
                    band,
                    r_mean: row.r_mean,
                    r_min: row.r_min,
                    r_max: row.r_max,
                    combined_p: row.combined_p,
                    subjects: row.subjects,
                });
            }
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationCell {
    pub feature: FeatureKind,
    pub classifier: String,
    pub band: Band,
    /// Mean leave-one-out F1 over subjects.
    pub f1: f64,
    pub subjects: usize,
}

/// Labeled trials of one subject: features of `kind` in `band`, labeled by the
/// binned efficacy self-rating.
pub fn labeled_trials(summary: &SessionSummary, eeg: &SessionEeg, kind: FeatureKind, band: Band) -> Result<Vec<LabeledTrial>> {
    let mut out = Vec::new();
    for t in &eeg.trials {
        let Some(a) = summary.trial(t.trial).and_then(|s| s.assessment) else { continue };
        let features = t.vector(kind, band);
        if features.is_empty() {
            continue;
        }
        out.push(LabeledTrial {
            features,
            label: Label::from_rating(a.efficacy_self_rating)?,
        });
    }
    Ok(out)
}

pub fn default_classifiers() -> [ClassifierSpec; 2] {
    [ClassifierSpec::Svm(SvmConfig::default()), ClassifierSpec::Knn { k: 5 }]
}

/// Feature kind × classifier × band grid of subject-averaged LOO F1.
pub fn classification_grid(
    sessions: &[SessionSummary],
    eeg: &[SessionEeg],
    average: Average,
) -> Result<Vec<ClassificationCell>> {
    let by_id: BTreeMap<&str, &SessionSummary> = sessions.iter().map(|s| (s.session.as_str(), s)).collect();
    let mut cells = Vec::new();
    for kind in FeatureKind::ALL {
        for classifier in default_classifiers() {
            for band in Band::ALL {
                let cfg = CvConfig {
                    classifier,
                    pca_dim: Some(2),
                    average,
                };
                let mut scores = Vec::new();
                for e in eeg {
                    let Some(summary) = by_id.get(e.session.as_str()) else { continue };
                    let trials = labeled_trials(summary, e, kind, band)?;
                    if trials.len() < 3 || trials[0].features.len() < 2 {
                        continue;
                    }
                    scores.push(loocv_f1(&trials, &cfg)?);
                }
                cells.push(ClassificationCell {
                    feature: kind,
                    classifier: classifier.name().to_string(),
                    band,
                    f1: if scores.is_empty() { f64::NAN } else { mean(&scores) },
                    subjects: scores.len(),
                });
            }
        }
    }
    Ok(cells)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LateralizationRow {
    pub band: Band,
    pub feedback_mean: f64,
    pub feedback_sd: f64,
    pub feedback_n: usize,
    pub non_feedback_mean: f64,
    pub non_feedback_sd: f64,
    pub non_feedback_n: usize,
    pub test: Option<TTest>,
}

/// Later-minus-earlier lateralization per subject, compared between groups.
pub fn lateralization_changes(sessions: &[SessionSummary], eeg: &[SessionEeg]) -> Result<Vec<LateralizationRow>> {
    let group_of: BTreeMap<&str, Group> = sessions.iter().map(|s| (s.session.as_str(), s.group)).collect();
    let sd = |v: &[f64]| if v.len() >= 2 { variance(v).sqrt() } else { f64::NAN };
    let avg = |v: &[f64]| if v.is_empty() { f64::NAN } else { mean(v) };
    Band::ALL
        .into_iter()
        .map(|band| {
            let (mut fb, mut nf) = (Vec::new(), Vec::new());
            for e in eeg {
                let Some(g) = group_of.get(e.session.as_str()) else { continue };
                if e.trials.len() < 2 {
                    continue;
                }
                let change = lateralized_power_change(&e.trials, band)?;
                match g {
                    Group::Feedback => fb.push(change),
                    Group::NonFeedback => nf.push(change),
                }
            }
            let test = if fb.len() >= 2 && nf.len() >= 2 {
                Some(two_sample_t(&fb, &nf)?)
            } else {
                None
            };
            Ok(LateralizationRow {
                band,
                feedback_mean: avg(&fb),
                feedback_sd: sd(&fb),
                feedback_n: fb.len(),
                non_feedback_mean: avg(&nf),
                non_feedback_sd: sd(&nf),
                non_feedback_n: nf.len(),
                test,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub questionnaires: Vec<GroupMatrix>,
    pub correlations: Vec<ElectrodeCorrelation>,
    pub classification: Vec<ClassificationCell>,
    pub lateralization: Vec<LateralizationRow>,
}

pub fn build_report(sessions: &[SessionSummary], eeg: &[SessionEeg]) -> Result<Report> {
    Ok(Report {
        questionnaires: questionnaire_matrices(sessions, 0.01)?,
        correlations: efficacy_correlations(sessions, eeg)?,
        classification: classification_grid(sessions, eeg, Average::Macro)?,
        lateralization: lateralization_changes(sessions, eeg)?,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.6}")
    } else {
        String::new()
    }
}

fn write_csv(path: &Path, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
    let io = |e: csv::Error| Error::Csv {
        path: path.to_path_buf(),
        line: 0,
        message: e.to_string(),
    };
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(&r).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

impl Report {
    /// Writes `correlations.csv`, `efficacy_tests.csv`, `classification.csv` and `lateralization.csv`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut t1 = Vec::new();
        for g in &self.questionnaires {
            let Some(m) = &g.matrix else { continue };
            for i in 0..m.names.len() {
                for j in 0..m.names.len() {
                    t1.push(vec![
                        g.group.to_string(),
                        m.names[i].clone(),
                        m.names[j].clone(),
                        opt(m.r[i][j]),
                        opt(m.p[i][j]),
                        opt(m.masked[i][j]),
                        g.n.to_string(),
                    ]);
                }
            }
        }
        write_csv(&dir.join("correlations.csv"), &["group", "row", "col", "r", "p", "r_significant", "n"], t1)?;

        let t2 = self
            .correlations
            .iter()
            .map(|c| {
                vec![
                    c.electrode.clone(),
                    c.band.to_string(),
                    num(c.r_mean),
                    num(c.r_min),
                    num(c.r_max),
                    format!("{:.6e}", c.combined_p),
                    c.subjects.to_string(),
                    (c.combined_p < 0.01).to_string(),
                ]
            })
            .collect();
        write_csv(
            &dir.join("efficacy_tests.csv"),
            &["electrode", "band", "r_mean", "r_min", "r_max", "combined_p", "subjects", "significant"],
            t2,
        )?;

        let t3 = self
            .classification
            .iter()
            .map(|c| {
                vec![
                    c.feature.name().to_string(),
                    c.classifier.clone(),
                    c.band.to_string(),
                    num(c.f1),
                    c.subjects.to_string(),
                ]
            })
            .collect();
        write_csv(&dir.join("classification.csv"), &["feature", "classifier", "band", "f1", "subjects"], t3)?;

        let f10 = self
            .lateralization
            .iter()
            .map(|r| {
                vec![
                    r.band.to_string(),
                    num(r.feedback_mean),
                    num(r.feedback_sd),
                    r.feedback_n.to_string(),
                    num(r.non_feedback_mean),
                    num(r.non_feedback_sd),
                    r.non_feedback_n.to_string(),
                    opt(r.test.map(|t| t.t)),
                    opt(r.test.map(|t| t.p)),
                ]
            })
            .collect();
        write_csv(
            &dir.join("lateralization.csv"),
            &[
                "band",
                "feedback_mean",
                "feedback_sd",
                "feedback_n",
                "non_feedback_mean",
                "non_feedback_sd",
                "non_feedback_n",
                "t",
                "p",
            ],
            f10,
        )?;
        Ok(())
    }
}
