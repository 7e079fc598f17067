//! Command implementations behind the `gm` binary: measure tables, framework
//! evaluation, group/activity/session analyses, the prediction ablation and
//! synthetic cohorts, emitted as CSV/JSON artifacts.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::measures::{compute_measures, write_measures_csv, MeasureConfig, MeasureSet};
use crate::model::{
    parse_manifest, write_cohort, Activity, ChildProfile, Cohort, Gender, Group, SessionIndex,
};
use crate::predict::{
    ablation, impute_duration, write_table4_csv, Feature, FeatureMatrix, PredictConfig,
};
use crate::stats::{
    chi_square_2x2, hedges_g, kde_gaussian, linspace, mean_sd, pearson, silverman_bandwidth,
    student_t_summary, welch_t_summary, zscore, Bandwidth, ChiSquareResult, CorrelationResult,
    GroupSummary, TTestResult, TestMethod,
};
use crate::synth::{generate_cohort, CohortConfig};

const TABLE1_FIXTURE: &str = include_str!("../fixtures/table1.csv");
const TABLE2_FIXTURE: &str = include_str!("../fixtures/table2.csv");
const TABLE3_FIXTURE: &str = include_str!("../fixtures/table3.csv");
const REPORTED_TESTS_FIXTURE: &str = include_str!("../fixtures/reported_tests.csv");

/// Rounds a reported value to 12 decimal places.
pub fn round_reported(x: f64) -> f64 {
    if x.is_finite() {
        (x * 1e12).round() / 1e12
    } else {
        x
    }
}

/// Process exit status for a failed command: 2 for bad input, 3 for a
/// numeric failure.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_input_error() {
        2
    } else {
        3
    }
}

// ---------------------------------------------------------------------------
// Analysis plan
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Grouping {
    /// Standard Therapy vs Play Therapy.
    ByGroup,
    /// Music Making vs Hello Song.
    ByActivityWithinPlay,
    /// Session 1 vs session 16, all observations.
    BySession,
}

impl Grouping {
    pub fn levels(self) -> (&'static str, &'static str) {
        match self {
            Grouping::ByGroup => ("StandardTherapy", "PlayTherapy"),
            Grouping::ByActivityWithinPlay => ("MusicMaking", "HelloSong"),
            Grouping::BySession => ("session_1", "session_16"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MeasureKind {
    Ratio,
    Duration,
    HumanCoded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestChoice {
    Student,
    Welch,
    /// Student on complete samples, Welch once missing values shrink them.
    Auto,
}

impl FromStr for TestChoice {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "student" => Ok(TestChoice::Student),
            "welch" => Ok(TestChoice::Welch),
            "auto" => Ok(TestChoice::Auto),
            other => Err(Error::invalid(format!(
                "unknown test {other:?}; expected student, welch or auto"
            ))),
        }
    }
}

impl fmt::Display for TestChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TestChoice::Student => "student",
            TestChoice::Welch => "welch",
            TestChoice::Auto => "auto",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub name: String,
    pub grouping: Grouping,
    pub measure: MeasureKind,
    #[serde(default = "default_test")]
    pub test: TestChoice,
}

fn default_test() -> TestChoice {
    TestChoice::Student
}

/// Test applied to the continuous demographic rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DemographicTest {
    /// One-way ANOVA over the two groups (F = Student t²).
    Anova,
    Welch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisPlan {
    pub comparisons: Vec<Comparison>,
    pub demographics_test: Option<DemographicTest>,
}

impl Default for AnalysisPlan {
    fn default() -> Self {
        let c = |name: &str, grouping, measure| Comparison {
            name: name.to_string(),
            grouping,
            measure,
            test: TestChoice::Student,
        };
        AnalysisPlan {
            comparisons: vec![
                c("group_ratio", Grouping::ByGroup, MeasureKind::Ratio),
                c(
                    "group_human_coded",
                    Grouping::ByGroup,
                    MeasureKind::HumanCoded,
                ),
                c("group_duration", Grouping::ByGroup, MeasureKind::Duration),
                c(
                    "play_activity_ratio",
                    Grouping::ByActivityWithinPlay,
                    MeasureKind::Ratio,
                ),
                c(
                    "play_activity_duration",
                    Grouping::ByActivityWithinPlay,
                    MeasureKind::Duration,
                ),
                c("session_ratio", Grouping::BySession, MeasureKind::Ratio),
                c(
                    "session_duration",
                    Grouping::BySession,
                    MeasureKind::Duration,
                ),
            ],
            demographics_test: None,
        }
    }
}

impl AnalysisPlan {
    pub fn from_json(text: &str) -> Result<Self> {
        let plan: AnalysisPlan = serde_json::from_str(text)
            .map_err(|e| Error::invalid(format!("analysis plan: {e}")))?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for c in &self.comparisons {
            if c.name.trim().is_empty() {
                return Err(Error::invalid("comparison with an empty name"));
            }
            if !seen.insert(c.name.as_str()) {
                return Err(Error::invalid(format!(
                    "duplicate comparison name {:?}",
                    c.name
                )));
            }
            if c.measure == MeasureKind::HumanCoded && c.grouping != Grouping::ByGroup {
                return Err(Error::invalid(format!(
                    "{}: the human-coded ratio is only compared between therapy groups",
                    c.name
                )));
            }
        }
        Ok(())
    }

    pub fn with_test(mut self, test: TestChoice) -> Self {
        self.comparisons.iter_mut().for_each(|c| c.test = test);
        self
    }
}

fn measure_value(m: &MeasureSet, kind: MeasureKind) -> Option<f64> {
    match kind {
        MeasureKind::Ratio => Some(m.mutual_gaze_ratio),
        MeasureKind::Duration => m.mutual_gaze_duration_frames,
        MeasureKind::HumanCoded => Some(m.human_coded_ratio),
    }
}

fn session_value(m: &MeasureSet, s: SessionIndex, kind: MeasureKind) -> Option<Option<f64>> {
    let sm = m.per_session.get(&s)?;
    Some(match kind {
        MeasureKind::Ratio => Some(sm.ratio),
        MeasureKind::Duration => sm.duration_frames,
        MeasureKind::HumanCoded => Some(sm.human_coded_ratio),
    })
}

/// Both samples of a comparison, absent values kept as `None`.
fn samples(
    measures: &[MeasureSet],
    grouping: Grouping,
    kind: MeasureKind,
) -> (Vec<Option<f64>>, Vec<Option<f64>>) {
    let mut a = Vec::new();
    let mut b = Vec::new();
    match grouping {
        Grouping::ByGroup => {
            for m in measures {
                match m.group {
                    Group::StandardTherapy => a.push(measure_value(m, kind)),
                    Group::PlayTherapy => b.push(measure_value(m, kind)),
                }
            }
        }
        Grouping::ByActivityWithinPlay => {
            for m in measures {
                match m.key.activity {
                    Activity::MusicMaking => a.push(measure_value(m, kind)),
                    Activity::HelloSong => b.push(measure_value(m, kind)),
                    Activity::Reading => {}
                }
            }
        }
        Grouping::BySession => {
            for m in measures {
                a.extend(session_value(m, SessionIndex::EARLY, kind));
                b.extend(session_value(m, SessionIndex::LATE, kind));
            }
        }
    }
    (a, b)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonResult {
    pub name: String,
    pub grouping: Grouping,
    pub measure: MeasureKind,
    pub first: String,
    pub second: String,
    pub first_summary: Option<GroupSummary>,
    pub second_summary: Option<GroupSummary>,
    /// Values left out because the measure was absent.
    pub missing: usize,
    pub test: Option<TTestResult>,
    pub hedges_g: Option<f64>,
    pub notice: Option<String>,
}

fn pick_method(choice: TestChoice, missing: usize, name: &str) -> TestMethod {
    match choice {
        TestChoice::Student => TestMethod::Student,
        TestChoice::Welch => TestMethod::Welch,
        TestChoice::Auto if missing == 0 => {
            log::info!("{name}: complete samples, Student t-test");
            TestMethod::Student
        }
        TestChoice::Auto => {
            log::info!("{name}: {missing} value(s) absent, Welch t-test");
            TestMethod::Welch
        }
    }
}

/// Two-sample test on summary statistics with the chosen method.
pub fn t_test(method: TestMethod, a: GroupSummary, b: GroupSummary) -> Result<TTestResult> {
    match method {
        TestMethod::Student => student_t_summary(a, b),
        TestMethod::Welch => welch_t_summary(a, b),
    }
}

pub fn run_comparison(measures: &[MeasureSet], c: &Comparison) -> Result<ComparisonResult> {
    let (a, b) = samples(measures, c.grouping, c.measure);
    let missing = a.iter().chain(&b).filter(|v| v.is_none()).count();
    let a: Vec<f64> = a.into_iter().flatten().collect();
    let b: Vec<f64> = b.into_iter().flatten().collect();
    let (first, second) = c.grouping.levels();
    let mut out = ComparisonResult {
        name: c.name.clone(),
        grouping: c.grouping,
        measure: c.measure,
        first: first.to_string(),
        second: second.to_string(),
        first_summary: GroupSummary::from_sample(&a).ok(),
        second_summary: GroupSummary::from_sample(&b).ok(),
        missing,
        test: None,
        hedges_g: None,
        notice: None,
    };
    let (Some(sa), Some(sb)) = (out.first_summary, out.second_summary) else {
        let msg = format!(
            "{}: skipped, needs at least 2 values per side ({} vs {})",
            c.name,
            a.len(),
            b.len()
        );
        log::warn!("{msg}");
        out.notice = Some(msg);
        return Ok(out);
    };
    let method = pick_method(c.test, missing, &c.name);
    out.test = Some(t_test(method, sa, sb)?);
    out.hedges_g = hedges_g(sa, sb).ok().map(|g| g.hedges_g);
    Ok(out)
}

// ---------------------------------------------------------------------------
// Summary tables
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table2Row {
    pub group: String,
    pub activity: String,
    pub n: usize,
    pub duration_n: Option<usize>,
    pub duration_mean: Option<f64>,
    pub duration_sd: Option<f64>,
    pub ratio_mean: Option<f64>,
    pub ratio_sd: Option<f64>,
    pub human_coded_mean: Option<f64>,
    pub human_coded_sd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table3Row {
    pub session: u8,
    pub activity: String,
    pub n: usize,
    pub ratio_mean: Option<f64>,
    pub ratio_sd: Option<f64>,
    pub duration_n: Option<usize>,
    pub duration_mean: Option<f64>,
    pub duration_sd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Row {
    pub characteristic: String,
    pub play_mean: Option<f64>,
    pub play_sd: Option<f64>,
    pub play_n: usize,
    pub standard_mean: Option<f64>,
    pub standard_sd: Option<f64>,
    pub standard_n: usize,
    pub play_male: Option<u32>,
    pub play_female: Option<u32>,
    pub standard_male: Option<u32>,
    pub standard_female: Option<u32>,
    pub reported_value: Option<f64>,
    pub reported_p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportedTest {
    pub name: String,
    pub t: f64,
    pub df: f64,
    pub p: Option<f64>,
    pub hedges_g: Option<f64>,
}

fn describe(x: &[f64]) -> (Option<f64>, Option<f64>) {
    match x.len() {
        0 => (None, None),
        1 => (Some(x[0]), None),
        _ => {
            let (m, s) = mean_sd(x).expect("non-empty");
            (Some(m), Some(s))
        }
    }
}

fn table2_row(group: &str, activity: &str, rows: &[&MeasureSet]) -> Table2Row {
    let ratio: Vec<f64> = rows.iter().map(|m| m.mutual_gaze_ratio).collect();
    let human: Vec<f64> = rows.iter().map(|m| m.human_coded_ratio).collect();
    let dur: Vec<f64> = rows
        .iter()
        .filter_map(|m| m.mutual_gaze_duration_frames)
        .collect();
    let (ratio_mean, ratio_sd) = describe(&ratio);
    let (human_coded_mean, human_coded_sd) = describe(&human);
    let (duration_mean, duration_sd) = describe(&dur);
    Table2Row {
        group: group.to_string(),
        activity: activity.to_string(),
        n: rows.len(),
        duration_n: Some(dur.len()),
        duration_mean,
        duration_sd,
        ratio_mean,
        ratio_sd,
        human_coded_mean,
        human_coded_sd,
    }
}

/// Per-activity, per-group and overall summaries of the pooled measures.
pub fn table2(measures: &[MeasureSet]) -> Vec<Table2Row> {
    let of = |f: &dyn Fn(&MeasureSet) -> bool| -> Vec<&MeasureSet> {
        measures.iter().filter(|m| f(m)).collect()
    };
    vec![
        table2_row(
            "PlayTherapy",
            "HelloSong",
            &of(&|m| m.key.activity == Activity::HelloSong),
        ),
        table2_row(
            "PlayTherapy",
            "MusicMaking",
            &of(&|m| m.key.activity == Activity::MusicMaking),
        ),
        table2_row(
            "PlayTherapy",
            "Combined",
            &of(&|m| m.group == Group::PlayTherapy),
        ),
        table2_row(
            "StandardTherapy",
            "Reading",
            &of(&|m| m.key.activity == Activity::Reading),
        ),
        table2_row("Total", "", &of(&|_| true)),
    ]
}

/// Early and late session summaries per activity and overall.
pub fn table3(measures: &[MeasureSet]) -> Vec<Table3Row> {
    let mut out = Vec::new();
    for s in [SessionIndex::EARLY, SessionIndex::LATE] {
        let filters: [(&str, Option<Activity>); 4] = [
            ("MusicMaking", Some(Activity::MusicMaking)),
            ("HelloSong", Some(Activity::HelloSong)),
            ("Reading", Some(Activity::Reading)),
            ("Total", None),
        ];
        for (label, act) in filters {
            let cells: Vec<_> = measures
                .iter()
                .filter(|m| act.is_none_or(|a| m.key.activity == a))
                .filter_map(|m| m.per_session.get(&s))
                .collect();
            let ratio: Vec<f64> = cells.iter().map(|c| c.ratio).collect();
            let dur: Vec<f64> = cells.iter().filter_map(|c| c.duration_frames).collect();
            let (ratio_mean, ratio_sd) = describe(&ratio);
            let (duration_mean, duration_sd) = describe(&dur);
            out.push(Table3Row {
                session: s.get(),
                activity: label.to_string(),
                n: cells.len(),
                ratio_mean,
                ratio_sd,
                duration_n: Some(dur.len()),
                duration_mean,
                duration_sd,
            });
        }
    }
    out
}

fn to_csv<T: Serialize>(rows: &[T], header: &[&str]) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    w.write_record(header)
        .map_err(|e| Error::invalid(e.to_string()))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::invalid(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

fn from_csv<T: for<'de> Deserialize<'de>>(text: &str, path: &Path) -> Result<Vec<T>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    rdr.deserialize()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| Error::parse(path, i as u64 + 2, e.to_string())))
        .collect()
}

pub const TABLE2_HEADER: [&str; 10] = [
    "group",
    "activity",
    "n",
    "duration_n",
    "duration_mean",
    "duration_sd",
    "ratio_mean",
    "ratio_sd",
    "human_coded_mean",
    "human_coded_sd",
];

pub const TABLE3_HEADER: [&str; 8] = [
    "session",
    "activity",
    "n",
    "ratio_mean",
    "ratio_sd",
    "duration_n",
    "duration_mean",
    "duration_sd",
];

pub fn write_table2_csv(rows: &[Table2Row]) -> Result<String> {
    to_csv(rows, &TABLE2_HEADER)
}

pub fn write_table3_csv(rows: &[Table3Row]) -> Result<String> {
    to_csv(rows, &TABLE3_HEADER)
}

pub fn parse_table2_str(text: &str, path: &Path) -> Result<Vec<Table2Row>> {
    from_csv(text, path)
}

pub fn parse_table3_str(text: &str, path: &Path) -> Result<Vec<Table3Row>> {
    from_csv(text, path)
}

// ---------------------------------------------------------------------------
// Published-table fixtures
// ---------------------------------------------------------------------------

pub fn fixture_table1() -> Vec<Table1Row> {
    from_csv(TABLE1_FIXTURE, Path::new("fixtures/table1.csv")).expect("bundled fixture parses")
}

pub fn fixture_table2() -> Vec<Table2Row> {
    from_csv(TABLE2_FIXTURE, Path::new("fixtures/table2.csv")).expect("bundled fixture parses")
}

pub fn fixture_table3() -> Vec<Table3Row> {
    from_csv(TABLE3_FIXTURE, Path::new("fixtures/table3.csv")).expect("bundled fixture parses")
}

pub fn fixture_reported_tests() -> Vec<ReportedTest> {
    from_csv(
        REPORTED_TESTS_FIXTURE,
        Path::new("fixtures/reported_tests.csv"),
    )
    .expect("bundled fixture parses")
}

fn t2_summary(rows: &[Table2Row], activity: &str, kind: MeasureKind) -> GroupSummary {
    let r = rows
        .iter()
        .find(|r| r.activity == activity)
        .expect("fixture row");
    let (m, s) = match kind {
        MeasureKind::Ratio => (r.ratio_mean, r.ratio_sd),
        MeasureKind::Duration => (r.duration_mean, r.duration_sd),
        MeasureKind::HumanCoded => (r.human_coded_mean, r.human_coded_sd),
    };
    GroupSummary::new(m.expect("fixture mean"), s.expect("fixture sd"), r.n)
}

fn t3_summary(rows: &[Table3Row], session: u8, kind: MeasureKind) -> GroupSummary {
    let r = rows
        .iter()
        .find(|r| r.session == session && r.activity == "Total")
        .expect("fixture row");
    let (m, s) = match kind {
        MeasureKind::Duration => (r.duration_mean, r.duration_sd),
        _ => (r.ratio_mean, r.ratio_sd),
    };
    GroupSummary::new(m.expect("fixture mean"), s.expect("fixture sd"), r.n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reproduction {
    pub comparison: Comparison,
    pub first: GroupSummary,
    pub second: GroupSummary,
    pub test: TTestResult,
    pub hedges_g: f64,
    pub reported: Option<ReportedTest>,
}

/// Re-runs the default plan's comparisons on the published summary tables.
/// Durations use the tables' full N, since the reduced counts behind the
/// published duration tests are not given.
pub fn reproduce_summary_tests(method: TestMethod) -> Result<Vec<Reproduction>> {
    let t2 = fixture_table2();
    let t3 = fixture_table3();
    let reported = fixture_reported_tests();
    AnalysisPlan::default()
        .comparisons
        .into_iter()
        .map(|c| {
            let (a, b) = match c.grouping {
                Grouping::ByGroup => (
                    t2_summary(&t2, "Reading", c.measure),
                    t2_summary(&t2, "Combined", c.measure),
                ),
                Grouping::ByActivityWithinPlay => (
                    t2_summary(&t2, "MusicMaking", c.measure),
                    t2_summary(&t2, "HelloSong", c.measure),
                ),
                Grouping::BySession => (
                    t3_summary(&t3, 1, c.measure),
                    t3_summary(&t3, 16, c.measure),
                ),
            };
            Ok(Reproduction {
                test: t_test(method, a, b)?,
                hedges_g: hedges_g(a, b)?.hedges_g,
                reported: reported.iter().find(|r| r.name == c.name).cloned(),
                first: a,
                second: b,
                comparison: c,
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Demographics
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemographicGroup {
    pub n: usize,
    pub male: usize,
    pub female: usize,
    pub age: Option<GroupSummary>,
    pub ados_social_affect: Option<GroupSummary>,
    pub level_of_functioning: Option<GroupSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemographicTestResult {
    pub characteristic: String,
    pub test: DemographicTest,
    pub statistic: f64,
    pub df: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demographics {
    pub play: DemographicGroup,
    pub standard: DemographicGroup,
    pub gender: Option<ChiSquareResult>,
    pub continuous: Vec<DemographicTestResult>,
    pub notices: Vec<String>,
}

fn demographic_group(profiles: &[&ChildProfile]) -> DemographicGroup {
    let col = |f: &dyn Fn(&ChildProfile) -> f64| -> Option<GroupSummary> {
        let v: Vec<f64> = profiles.iter().map(|p| f(p)).collect();
        GroupSummary::from_sample(&v).ok()
    };
    DemographicGroup {
        n: profiles.len(),
        male: profiles.iter().filter(|p| p.gender == Gender::M).count(),
        female: profiles.iter().filter(|p| p.gender == Gender::F).count(),
        age: col(&|p| p.age),
        ados_social_affect: col(&|p| f64::from(p.ados_social_affect)),
        level_of_functioning: col(&|p| f64::from(p.level_of_functioning)),
    }
}

/// Continuous-row test between Play (first) and Standard (second).
pub fn demographic_test(
    characteristic: &str,
    test: DemographicTest,
    play: GroupSummary,
    standard: GroupSummary,
) -> Result<DemographicTestResult> {
    let (statistic, df, p) = match test {
        DemographicTest::Anova => {
            let t = student_t_summary(play, standard)?;
            (t.t * t.t, t.df, t.p_two_sided)
        }
        DemographicTest::Welch => {
            let t = welch_t_summary(play, standard)?;
            (t.t, t.df, t.p_two_sided)
        }
    };
    Ok(DemographicTestResult {
        characteristic: characteristic.to_string(),
        test,
        statistic,
        df,
        p,
    })
}

/// Children are assigned to the group of their observations; a child seen
/// in both groups is counted in the first one found.
pub fn demographics(
    measures: &[MeasureSet],
    profiles: &BTreeMap<String, ChildProfile>,
    test: Option<DemographicTest>,
) -> Demographics {
    let mut group_of: BTreeMap<&str, Group> = BTreeMap::new();
    let mut notices = Vec::new();
    for m in measures {
        let g = *group_of.entry(m.key.child_id.as_str()).or_insert(m.group);
        if g != m.group {
            let msg = format!(
                "child {} appears in both therapy groups; counted in {g}",
                m.key.child_id
            );
            log::warn!("{msg}");
            notices.push(msg);
        }
    }
    let members = |g: Group| -> Vec<&ChildProfile> {
        group_of
            .iter()
            .filter(|(_, gg)| **gg == g)
            .filter_map(|(c, _)| profiles.get(*c))
            .collect()
    };
    let play = demographic_group(&members(Group::PlayTherapy));
    let standard = demographic_group(&members(Group::StandardTherapy));
    let gender = match chi_square_2x2([
        [play.male as f64, play.female as f64],
        [standard.male as f64, standard.female as f64],
    ]) {
        Ok(r) => Some(r),
        Err(e) => {
            notices.push(format!("gender chi-square not computed: {e}"));
            None
        }
    };
    let mut continuous = Vec::new();
    if let Some(test) = test {
        let rows = [
            ("age", play.age, standard.age),
            (
                "ados_social_affect",
                play.ados_social_affect,
                standard.ados_social_affect,
            ),
            (
                "level_of_functioning",
                play.level_of_functioning,
                standard.level_of_functioning,
            ),
        ];
        for (name, a, b) in rows {
            match (a, b) {
                (Some(a), Some(b)) => match demographic_test(name, test, a, b) {
                    Ok(r) => continuous.push(r),
                    Err(e) => notices.push(format!("{name}: {e}")),
                },
                _ => notices.push(format!("{name}: fewer than 2 children in a group")),
            }
        }
    }
    Demographics {
        play,
        standard,
        gender,
        continuous,
        notices,
    }
}

// ---------------------------------------------------------------------------
// Framework evaluation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationSummary {
    pub n: usize,
    pub r: f64,
    /// `None` when the fit is perfect and F is unbounded.
    #[serde(rename = "F")]
    pub f_stat: Option<f64>,
    pub df: (usize, usize),
    pub p: f64,
    pub rmse: f64,
    pub slope: f64,
    pub intercept: f64,
}

impl From<&CorrelationResult> for EvaluationSummary {
    fn from(c: &CorrelationResult) -> Self {
        EvaluationSummary {
            n: c.n,
            r: round_reported(c.r),
            f_stat: c.f_stat.is_finite().then(|| round_reported(c.f_stat)),
            df: c.df,
            p: round_reported(c.p),
            rmse: round_reported(c.rmse),
            slope: round_reported(c.slope),
            intercept: round_reported(c.intercept),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterRow {
    pub child_id: String,
    pub activity: Activity,
    pub group: Group,
    pub mutual_gaze_ratio: f64,
    pub human_coded_ratio: f64,
    pub z_mutual_gaze_ratio: f64,
    pub z_human_coded_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KdeRow {
    pub group: Group,
    pub series: String,
    pub x: f64,
    pub density: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub correlation: CorrelationResult,
    pub scatter: Vec<ScatterRow>,
    pub kde: Vec<KdeRow>,
}

pub const KDE_GRID_POINTS: usize = 201;

/// Correlates the framework's ratio with the human-coded ratio and builds the
/// standardized scatter and per-group density data.
pub fn evaluate(measures: &[MeasureSet]) -> Result<Evaluation> {
    let x: Vec<f64> = measures.iter().map(|m| m.mutual_gaze_ratio).collect();
    let y: Vec<f64> = measures.iter().map(|m| m.human_coded_ratio).collect();
    let correlation = pearson(&x, &y)?;
    let zx = zscore(&x)?;
    let zy = zscore(&y)?;
    let scatter: Vec<ScatterRow> = measures
        .iter()
        .zip(zx.iter().zip(&zy))
        .map(|(m, (&a, &b))| ScatterRow {
            child_id: m.key.child_id.clone(),
            activity: m.key.activity,
            group: m.group,
            mutual_gaze_ratio: m.mutual_gaze_ratio,
            human_coded_ratio: m.human_coded_ratio,
            z_mutual_gaze_ratio: a,
            z_human_coded_ratio: b,
        })
        .collect();

    let lo = zx.iter().chain(&zy).copied().fold(f64::INFINITY, f64::min) - 1.0;
    let hi = zx
        .iter()
        .chain(&zy)
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
        + 1.0;
    let grid = linspace(lo, hi, KDE_GRID_POINTS);
    let mut kde = Vec::new();
    for g in [Group::PlayTherapy, Group::StandardTherapy] {
        for (series, pick) in [
            (
                "mutual_gaze_ratio",
                (|r| r.z_mutual_gaze_ratio) as fn(&ScatterRow) -> f64,
            ),
            ("human_coded_ratio", |r| r.z_human_coded_ratio),
        ] {
            let v: Vec<f64> = scatter.iter().filter(|r| r.group == g).map(pick).collect();
            let bw = match silverman_bandwidth(&v) {
                Ok(bw) if bw > 0.0 => bw,
                _ => {
                    log::warn!("{g} {series}: no density (fewer than 2 distinct values)");
                    continue;
                }
            };
            let dens = kde_gaussian(&v, &grid, Bandwidth::Fixed(bw))?;
            kde.extend(grid.iter().zip(dens).map(|(&x, density)| KdeRow {
                group: g,
                series: series.to_string(),
                x,
                density,
            }));
        }
    }
    Ok(Evaluation {
        correlation,
        scatter,
        kde,
    })
}

pub const SCATTER_HEADER: [&str; 7] = [
    "child_id",
    "activity",
    "group",
    "mutual_gaze_ratio",
    "human_coded_ratio",
    "z_mutual_gaze_ratio",
    "z_human_coded_ratio",
];

pub const KDE_HEADER: [&str; 4] = ["group", "series", "x", "density"];

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

/// One output file: its name inside the output directory and its contents.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

impl Artifact {
    fn new(name: &str, contents: String) -> Self {
        Artifact {
            name: name.to_string(),
            contents,
        }
    }
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report types serialize");
    s.push('\n');
    s
}

pub fn measures_artifacts(cohort: &Cohort, cfg: &MeasureConfig) -> Result<Vec<Artifact>> {
    let m = compute_measures(cohort, cfg)?;
    Ok(vec![Artifact::new("measures.csv", write_measures_csv(&m))])
}

pub fn evaluate_artifacts(measures: &[MeasureSet]) -> Result<Vec<Artifact>> {
    let ev = evaluate(measures)?;
    Ok(vec![
        Artifact::new(
            "evaluation.json",
            json(&EvaluationSummary::from(&ev.correlation)),
        ),
        Artifact::new("scatter.csv", to_csv(&ev.scatter, &SCATTER_HEADER)?),
        Artifact::new("kde.csv", to_csv(&ev.kde, &KDE_HEADER)?),
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct BoxRow<'a> {
    grouping: Grouping,
    level: &'a str,
    child_id: &'a str,
    activity: Activity,
    measure: MeasureKind,
    value: f64,
}

fn boxplot_rows(measures: &[MeasureSet]) -> Vec<BoxRow<'_>> {
    let mut out = Vec::new();
    for grouping in [Grouping::ByGroup, Grouping::ByActivityWithinPlay] {
        for kind in [MeasureKind::Ratio, MeasureKind::Duration] {
            for m in measures {
                let level = match grouping {
                    Grouping::ByGroup => m.group.as_str(),
                    _ if m.group == Group::PlayTherapy => m.key.activity.as_str(),
                    _ => continue,
                };
                if let Some(value) = measure_value(m, kind) {
                    out.push(BoxRow {
                        grouping,
                        level,
                        child_id: &m.key.child_id,
                        activity: m.key.activity,
                        measure: kind,
                        value,
                    });
                }
            }
        }
    }
    out
}

fn rounded_comparison(mut c: ComparisonResult) -> ComparisonResult {
    if let Some(t) = c.test.as_mut() {
        t.t = round_reported(t.t);
        t.df = round_reported(t.df);
        t.p_two_sided = round_reported(t.p_two_sided);
    }
    c.hedges_g = c.hedges_g.map(round_reported);
    c
}

pub fn analyze_artifacts(
    measures: &[MeasureSet],
    profiles: &BTreeMap<String, ChildProfile>,
    plan: &AnalysisPlan,
) -> Result<Vec<Artifact>> {
    plan.validate()?;
    let results = plan
        .comparisons
        .iter()
        .map(|c| run_comparison(measures, c).map(rounded_comparison))
        .collect::<Result<Vec<_>>>()?;
    Ok(vec![
        Artifact::new("tests.json", json(&results)),
        Artifact::new("table2.csv", write_table2_csv(&table2(measures))?),
        Artifact::new("table3.csv", write_table3_csv(&table3(measures))?),
        Artifact::new(
            "boxplot.csv",
            to_csv(
                &boxplot_rows(measures),
                &[
                    "grouping", "level", "child_id", "activity", "measure", "value",
                ],
            )?,
        ),
        Artifact::new(
            "demographics.json",
            json(&demographics(measures, profiles, plan.demographics_test)),
        ),
    ])
}

pub fn predict_artifacts(
    measures: &[MeasureSet],
    profiles: &BTreeMap<String, ChildProfile>,
    cfg: &PredictConfig,
    b: usize,
    seed: u64,
) -> Result<Vec<Artifact>> {
    let mut data = FeatureMatrix::from_measures(measures, profiles)?;
    let dur = data
        .features
        .iter()
        .position(|&f| f == Feature::MutualGazeDuration);
    if dur.is_some_and(|j| data.x.column(j).iter().all(|v| v.is_nan())) {
        data = impute_duration(&data).data;
    }
    let reports = ablation(&data, b, seed, cfg)?;
    Ok(vec![
        Artifact::new("table4.csv", write_table4_csv(&reports)),
        Artifact::new("predict.json", json(&reports)),
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Measures,
    Evaluate,
    Analyze,
    Predict,
    Synth,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub manifest: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub measure: MeasureConfig,
    pub bootstrap: usize,
    pub config: Option<PathBuf>,
    pub test: Option<TestChoice>,
    /// Print the primary artifact to stdout instead of writing it.
    pub stdout: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            manifest: None,
            out: PathBuf::from("."),
            seed: None,
            measure: MeasureConfig::default(),
            bootstrap: 1000,
            config: None,
            test: None,
            stdout: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Outcome {
    pub written: Vec<PathBuf>,
    pub stdout: Option<String>,
}

fn manifest_path(opts: &RunOptions) -> Result<&Path> {
    opts.manifest
        .as_deref()
        .ok_or_else(|| Error::invalid("--manifest is required for this command"))
}

fn read_config(opts: &RunOptions) -> Result<Option<String>> {
    opts.config
        .as_deref()
        .map(crate::io::read_to_string)
        .transpose()
}

/// Parses the manifest and computes measures with the run's thresholds.
fn load_measures(opts: &RunOptions) -> Result<(Vec<MeasureSet>, BTreeMap<String, ChildProfile>)> {
    let path = manifest_path(opts)?;
    opts.measure.validate()?;
    let cohort = parse_manifest(path)?;
    let measures = compute_measures(&cohort, &opts.measure)?;
    Ok((measures, cohort.profiles))
}

fn emit(artifacts: Vec<Artifact>, opts: &RunOptions) -> Result<Outcome> {
    let mut out = Outcome::default();
    for (i, a) in artifacts.into_iter().enumerate() {
        if i == 0 && opts.stdout {
            out.stdout = Some(a.contents);
            continue;
        }
        let path = opts.out.join(&a.name);
        write_atomic(&path, a.contents.as_bytes())?;
        log::info!("wrote {}", path.display());
        out.written.push(path);
    }
    Ok(out)
}

pub fn cmd_measures(opts: &RunOptions) -> Result<Outcome> {
    opts.measure.validate()?;
    let cohort = parse_manifest(manifest_path(opts)?)?;
    emit(measures_artifacts(&cohort, &opts.measure)?, opts)
}

pub fn cmd_evaluate(opts: &RunOptions) -> Result<Outcome> {
    let (measures, _) = load_measures(opts)?;
    emit(evaluate_artifacts(&measures)?, opts)
}

pub fn cmd_analyze(opts: &RunOptions) -> Result<Outcome> {
    let mut plan = match read_config(opts)? {
        Some(text) => AnalysisPlan::from_json(&text)?,
        None => AnalysisPlan::default(),
    };
    if let Some(t) = opts.test {
        plan = plan.with_test(t);
    }
    let (measures, profiles) = load_measures(opts)?;
    emit(analyze_artifacts(&measures, &profiles, &plan)?, opts)
}

pub fn cmd_predict(opts: &RunOptions) -> Result<Outcome> {
    let cfg = match read_config(opts)? {
        Some(text) => PredictConfig::from_json(&text)?,
        None => PredictConfig::default(),
    };
    let (measures, profiles) = load_measures(opts)?;
    emit(
        predict_artifacts(
            &measures,
            &profiles,
            &cfg,
            opts.bootstrap,
            opts.seed.unwrap_or(0),
        )?,
        opts,
    )
}

/// Writes a synthetic cohort under `--out`; the manifest path goes to stdout.
pub fn cmd_synth(opts: &RunOptions) -> Result<Outcome> {
    let mut cfg = match read_config(opts)? {
        Some(text) => serde_json::from_str::<CohortConfig>(&text)
            .map_err(|e| Error::invalid(format!("synthetic cohort config: {e}")))?,
        None => CohortConfig::default(),
    };
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    let synth = generate_cohort(&cfg)?;
    let manifest = write_cohort(&synth.cohort, &opts.out)?;
    let mut truth = String::from("child_id,activity,truth_ratio\n");
    for (k, r) in &synth.truth_ratio {
        truth.push_str(&format!("{},{},{}\n", k.child_id, k.activity, r));
    }
    let truth_path = opts.out.join("truth.csv");
    write_atomic(&truth_path, truth.as_bytes())?;
    Ok(Outcome {
        stdout: opts.stdout.then(|| format!("{}\n", manifest.display())),
        written: vec![manifest, truth_path],
    })
}

pub fn run(cmd: Command, opts: &RunOptions) -> Result<Outcome> {
    match cmd {
        Command::Measures => cmd_measures(opts),
        Command::Evaluate => cmd_evaluate(opts),
        Command::Analyze => cmd_analyze(opts),
        Command::Predict => cmd_predict(opts),
        Command::Synth => cmd_synth(opts),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_parse() {
        assert_eq!(fixture_table1().len(), 4);
        assert_eq!(fixture_table2().len(), 5);
        assert_eq!(fixture_table3().len(), 8);
        assert_eq!(fixture_reported_tests().len(), 7);
    }

    #[test]
    fn summary_reproduction_matches_published_tests() {
        for r in reproduce_summary_tests(TestMethod::Student).unwrap() {
            let rep = r.reported.as_ref().unwrap();
            // Duration tests ran on reduced samples whose sizes are unknown.
            if r.comparison.measure == MeasureKind::Duration {
                assert_eq!(r.test.t.signum(), rep.t.signum(), "{}", rep.name);
                continue;
            }
            assert!(
                (r.test.t - rep.t).abs() < 0.15,
                "{}: {} vs {}",
                rep.name,
                r.test.t,
                rep.t
            );
            assert_eq!(r.test.df, rep.df, "{}", rep.name);
            if let Some(p) = rep.p {
                assert!((r.test.p_two_sided - p).abs() < 0.05, "{}", rep.name);
            }
            if let Some(g) = rep.hedges_g {
                assert!((r.hedges_g - g).abs() < 0.05, "{}", rep.name);
            }
        }
    }

    #[test]
    fn gender_row_reproduces() {
        let g = fixture_table1()
            .into_iter()
            .find(|r| r.characteristic == "gender")
            .unwrap();
        let c = chi_square_2x2([
            [g.play_male.unwrap() as f64, g.play_female.unwrap() as f64],
            [
                g.standard_male.unwrap() as f64,
                g.standard_female.unwrap() as f64,
            ],
        ])
        .unwrap();
        assert!((c.chi2 - g.reported_value.unwrap()).abs() < 0.01);
        assert!((c.p - g.reported_p.unwrap()).abs() < 0.01);
    }

    #[test]
    fn plan_rejects_human_coded_by_session() {
        let plan = AnalysisPlan {
            comparisons: vec![Comparison {
                name: "x".into(),
                grouping: Grouping::BySession,
                measure: MeasureKind::HumanCoded,
                test: TestChoice::Auto,
            }],
            demographics_test: None,
        };
        assert!(plan.validate().is_err());
        assert!(AnalysisPlan::default().validate().is_ok());
    }

    #[test]
    fn plan_json_round_trip() {
        let p = AnalysisPlan::default().with_test(TestChoice::Auto);
        let back = AnalysisPlan::from_json(&serde_json::to_string(&p).unwrap()).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn table_csv_round_trip() {
        let t2 = fixture_table2();
        let text = write_table2_csv(&t2).unwrap();
        assert_eq!(parse_table2_str(&text, Path::new("t")).unwrap(), t2);
        let t3 = fixture_table3();
        let text = write_table3_csv(&t3).unwrap();
        assert_eq!(parse_table3_str(&text, Path::new("t")).unwrap(), t3);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::invalid("x")), 2);
        assert_eq!(exit_code(&Error::validation("x")), 2);
        assert_eq!(exit_code(&Error::numeric("x")), 3);
    }
}
