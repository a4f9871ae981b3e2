// Copyright 2026 The ribvf Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


//! The guide under `book/`, compiled as doc-tests so every snippet keeps
//! building and passing against the current library.
#![doc = include_str!("../../../book/src/introduction.md")]

#[doc = include_str!("../../../book/src/body.md")]
pub mod body {}

#[doc = include_str!("../../../book/src/fixtures.md")]
pub mod fixtures {}

#[doc = include_str!("../../../book/src/filter.md")]
pub mod filter {}

#[doc = include_str!("../../../book/src/follower.md")]
pub mod follower {}

#[doc = include_str!("../../../book/src/sessions.md")]
pub mod sessions {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
