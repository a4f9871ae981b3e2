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


use std::sync::{Condvar, Mutex};

/// Single-slot conflating channel: writers overwrite, readers see only the
/// newest value. Sequence numbers let a reader tell fresh data from stale.
#[derive(Debug, Default)]
pub struct Latest<T> {
    slot: Mutex<(u64, Option<T>)>,
    changed: Condvar,
}

impl<T: Clone> Latest<T> {
    pub fn new() -> Self {
        Latest { slot: Mutex::new((0, None)), changed: Condvar::new() }
    }

    pub fn publish(&self, value: T) -> u64 {
        let mut g = self.slot.lock().expect("latest slot poisoned");
        g.0 += 1;
        g.1 = Some(value);
        self.changed.notify_all();
        g.0
    }

    pub fn get(&self) -> Option<(u64, T)> {
        let g = self.slot.lock().expect("latest slot poisoned");
        g.1.clone().map(|v| (g.0, v))
    }

    /// Value newer than sequence `seen`, if any.
    pub fn newer_than(&self, seen: u64) -> Option<(u64, T)> {
        let g = self.slot.lock().expect("latest slot poisoned");
        if g.0 > seen {
            g.1.clone().map(|v| (g.0, v))
        } else {
            None
        }
    }

    /// Blocks up to `timeout` for a value newer than `seen`.
    pub fn wait_newer(&self, seen: u64, timeout: std::time::Duration) -> Option<(u64, T)> {
        let g = self.slot.lock().expect("latest slot poisoned");
        let (g, _) = self
            .changed
            .wait_timeout_while(g, timeout, |s| s.0 <= seen)
            .expect("latest slot poisoned");
        if g.0 > seen {
            g.1.clone().map(|v| (g.0, v))
        } else {
            None
        }
    }
}
