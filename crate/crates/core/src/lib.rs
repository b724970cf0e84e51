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
//! Kinematics, learned inverse kinematics and RRT*-style motion planning for
//! minimally actuated serial robots: planar arms with passive joints that a
//! single mobile actuator (MA) drives by travelling along the links.

pub mod bench;
pub mod datagen;
pub mod error;
pub mod formats;
pub mod geometry;
pub mod ik_learn;
pub mod ik_numeric;
pub mod kinematics;
pub mod mlp;
pub mod planner;
pub mod motion;
pub mod se2;
pub mod svg;

pub use error::{Error, Result};
pub use kinematics::{Configuration, RobotModel};
pub use se2::{PoseSE2, Twist};
