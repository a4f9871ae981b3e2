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


//! Session wire protocol: JSON text messages over a WebSocket.
//!
//! Every message is an object with a `type` tag and a mandatory
//! `protocol_version`. All geometry is in metres, vectors are `[x, y, z]`.

use serde::{Deserialize, Serialize};

use super::{SessionConfig, SessionFrame};
use crate::geometry::TriMesh;
use crate::Vec3;

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshPayload {
    pub name: String,
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[usize; 3]>,
}

impl MeshPayload {
    pub fn new(name: impl Into<String>, mesh: &TriMesh) -> Self {
        MeshPayload { name: name.into(), vertices: mesh.vertices().to_vec(), faces: mesh.faces().to_vec() }
    }
}

/// Server to client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    /// First message on every connection.
    SceneInit {
        protocol_version: u32,
        skin: MeshPayload,
        fixtures: Vec<MeshPayload>,
        config: Box<SessionConfig>,
        /// Probe position after a reset.
        start: Vec3,
    },
    StateFrame { protocol_version: u32, frame: SessionFrame },
    Error { protocol_version: u32, message: String },
}

impl ServerMessage {
    pub fn error(message: impl Into<String>) -> Self {
        ServerMessage::Error { protocol_version: PROTOCOL_VERSION, message: message.into() }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server messages serialise")
    }
}

/// Client to server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientMessage {
    /// New leader reference.
    ReferenceUpdate { protocol_version: u32, position: Vec3 },
    /// Switch the fixture and/or reset the probe to the start position.
    ModeSet {
        protocol_version: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        vf_enabled: Option<bool>,
        #[serde(default)]
        reset: bool,
    },
}

impl ClientMessage {
    /// Parses and checks the version and the values.
    pub fn parse(text: &str) -> Result<Self, String> {
        let msg: ClientMessage = serde_json::from_str(text).map_err(|e| format!("malformed message: {e}"))?;
        let version = match &msg {
            ClientMessage::ReferenceUpdate { protocol_version, .. } | ClientMessage::ModeSet { protocol_version, .. } => {
                *protocol_version
            }
        };
        if version != PROTOCOL_VERSION {
            return Err(format!("protocol version {version} is not supported (expected {PROTOCOL_VERSION})"));
        }
        if let ClientMessage::ReferenceUpdate { position, .. } = &msg {
            if !position.iter().all(|v| v.is_finite()) {
                return Err("reference position must be finite".into());
            }
        }
        Ok(msg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("client messages serialise")
    }
}
