use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Vlog group.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Label {
    Daily,
    Depression,
    HighRisk,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::Daily, Label::Depression, Label::HighRisk];

    /// Row label used in report tables.
    pub fn display_name(self) -> &'static str {
        match self {
            Label::Daily => "Daily",
            Label::Depression => "Depression",
            Label::HighRisk => "High-risk potential",
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            Label::Daily => "daily",
            Label::Depression => "depression",
            Label::HighRisk => "high-risk",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Label {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        Label::ALL
            .into_iter()
            .find(|l| l.key() == s)
            .ok_or_else(|| Error::Config(format!("unknown label '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Task {
    #[serde(rename = "daily-vs-depression")]
    DailyVsDepression,
    #[serde(rename = "daily-vs-highrisk")]
    DailyVsHighRisk,
    #[serde(rename = "multiclass3")]
    Multiclass3,
}

impl Task {
    /// Classes in output order. For binary tasks the second class is the
    /// positive one (sigmoid output 1).
    pub fn classes(self) -> &'static [Label] {
        match self {
            Task::DailyVsDepression => &[Label::Daily, Label::Depression],
            Task::DailyVsHighRisk => &[Label::Daily, Label::HighRisk],
            Task::Multiclass3 => &Label::ALL,
        }
    }

    pub fn class_index(self, label: Label) -> Option<usize> {
        self.classes().iter().position(|&l| l == label)
    }

    pub fn is_binary(self) -> bool {
        self != Task::Multiclass3
    }

    pub fn num_classes(self) -> usize {
        self.classes().len()
    }

    /// Width of the classifier output layer.
    pub fn output_width(self) -> usize {
        if self.is_binary() {
            1
        } else {
            3
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            Task::DailyVsDepression => "daily-vs-depression",
            Task::DailyVsHighRisk => "daily-vs-highrisk",
            Task::Multiclass3 => "multiclass3",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Task::DailyVsDepression => "Daily and Depression",
            Task::DailyVsHighRisk => "Daily and High-risk Depression",
            Task::Multiclass3 => "Multiclass (Daily, Depression, High-risk)",
        }
    }
}

impl FromStr for Task {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "daily-vs-depression" => Ok(Task::DailyVsDepression),
            "daily-vs-highrisk" | "daily-vs-high-risk" => Ok(Task::DailyVsHighRisk),
            "multiclass3" | "multiclass" => Ok(Task::Multiclass3),
            other => Err(Error::Config(format!("unknown task '{other}'"))),
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}
