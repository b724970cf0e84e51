/*
Copyright 2026 The masr Authors

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/
use thiserror::Error;

/// Errors produced by the masr toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("joint {joint} angle {angle} rad outside [-{bound}, {bound}]")]
    JointOutOfBounds { joint: usize, angle: f64, bound: f64 },
    #[error("MA position {d} m outside [0, {total}]")]
    MaOutOfRange { d: f64, total: f64 },
    #[error("validation error: {0}")]
    Validation(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("planning failure: {0}")]
    Planning(String),
    #[error("training failure: {0}")]
    Training(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag for the error class.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) | Error::JointOutOfBounds { .. } | Error::MaOutOfRange { .. } => {
                "domain"
            }
            Error::Validation(_) => "validation",
            Error::Config(_) => "config",
            Error::Planning(_) => "planning",
            Error::Training(_) => "training",
            Error::Parse(_) | Error::Json(_) => "parse",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
