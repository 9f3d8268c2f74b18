//! Subcircuit expansion into a flat device graph.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::FlattenError;
use crate::netlist::{Element, ElementKind, ModelCard, Netlist, GROUND};

pub type NodeId = usize;

/// A primitive device after expansion. `name` is hierarchical (`X1.M1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatDevice {
    pub name: String,
    pub kind: ElementKind,
    pub nodes: Vec<NodeId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    /// Key into [`FlatCircuit::models`]; unresolved names are kept verbatim.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FlatCircuit {
    pub devices: Vec<FlatDevice>,
    /// Interned node names; `"0"` is index 0 whenever it is present.
    pub nodes: Vec<String>,
    pub models: BTreeMap<String, ModelCard>,
}

impl FlatCircuit {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn device_count(&self) -> usize {
        self.devices.len()
    }

    pub fn has_ground(&self) -> bool {
        self.nodes.first().is_some_and(|n| n == GROUND)
    }

    pub fn node_id(&self, name: &str) -> Option<NodeId> {
        let name = name.to_ascii_lowercase();
        self.nodes.iter().position(|n| *n == name)
    }

    pub fn node_name(&self, id: NodeId) -> &str {
        &self.nodes[id]
    }

    pub fn device(&self, name: &str) -> Option<(usize, &FlatDevice)> {
        self.devices
            .iter()
            .enumerate()
            .find(|(_, d)| d.name.eq_ignore_ascii_case(name))
    }

    pub fn model_for(&self, device: &FlatDevice) -> Option<&ModelCard> {
        device.model.as_ref().and_then(|m| self.models.get(m))
    }
}

struct PendingDevice {
    name: String,
    kind: ElementKind,
    nodes: Vec<String>,
    value: Option<f64>,
    model: Option<String>,
    params: BTreeMap<String, f64>,
}

struct Expander<'a> {
    netlist: &'a Netlist,
    out: Vec<PendingDevice>,
    models: BTreeMap<String, ModelCard>,
    stack: Vec<String>,
}

impl Expander<'_> {
    /// `prefix` is the hierarchical instance path ("" at top level, "X1."
    /// inside X1); `node_map` resolves local node names to global ones.
    fn expand(
        &mut self,
        elements: &[Element],
        prefix: &str,
        node_map: &HashMap<String, String>,
        local_models: Option<&str>,
    ) -> Result<(), FlattenError> {
        for el in elements {
            let nodes: Vec<String> = el
                .nodes
                .iter()
                .map(|n| {
                    if n == GROUND {
                        n.clone()
                    } else if let Some(g) = node_map.get(n) {
                        g.clone()
                    } else if prefix.is_empty() {
                        n.clone()
                    } else {
                        format!("{}{n}", prefix.to_ascii_lowercase())
                    }
                })
                .collect();
            let name = format!("{prefix}{}", el.name);

            if el.kind != ElementKind::SubcktInstance {
                let model = el.model_ref.as_ref().map(|m| {
                    let scoped = local_models.map(|s| format!("{s}/{m}"));
                    match scoped {
                        Some(key) if self.models.contains_key(&key) => key,
                        _ => m.clone(),
                    }
                });
                self.out.push(PendingDevice {
                    name,
                    kind: el.kind,
                    nodes,
                    value: el.value.as_ref().map(|v| v.magnitude),
                    model,
                    params: el.params.iter().map(|(k, v)| (k.clone(), v.magnitude)).collect(),
                });
                continue;
            }

            let target = el.model_ref.clone().unwrap_or_default();
            let def = self
                .netlist
                .subckts
                .get(&target)
                .ok_or_else(|| FlattenError::UnresolvedSubckt {
                    instance: name.clone(),
                    subckt: target.clone(),
                })?;
            if def.ports.len() != nodes.len() {
                return Err(FlattenError::PortArityMismatch {
                    instance: name,
                    subckt: def.name.clone(),
                    expected: def.ports.len(),
                    found: nodes.len(),
                });
            }
            if self.stack.contains(&def.name) {
                let mut chain = self.stack.clone();
                chain.push(def.name.clone());
                return Err(FlattenError::Recursion { chain });
            }
            for (k, m) in &def.local_models {
                self.models
                    .entry(format!("{}/{k}", def.name))
                    .or_insert_with(|| m.clone());
            }
            let inner_map: HashMap<String, String> =
                def.ports.iter().cloned().zip(nodes).collect();
            self.stack.push(def.name.clone());
            self.expand(&def.body, &format!("{name}."), &inner_map, Some(&def.name))?;
            self.stack.pop();
        }
        Ok(())
    }
}

/// Expand every subcircuit instance depth-first in document order.
///
/// Internal nodes become `<instance path>.<node>` (lowercased), ports take
/// the instance's connection nodes, and ground stays global.
pub fn flatten(netlist: &Netlist) -> Result<FlatCircuit, FlattenError> {
    let mut ex = Expander {
        netlist,
        out: Vec::new(),
        models: netlist.models.clone(),
        stack: Vec::new(),
    };
    ex.expand(&netlist.elements, "", &HashMap::new(), None)?;

    let mut nodes: Vec<String> = Vec::new();
    let mut index: HashMap<String, NodeId> = HashMap::new();
    if ex.out.iter().any(|d| d.nodes.iter().any(|n| n == GROUND)) {
        nodes.push(GROUND.to_string());
        index.insert(GROUND.to_string(), 0);
    }
    let devices = ex
        .out
        .into_iter()
        .map(|d| {
            let ids = d
                .nodes
                .into_iter()
                .map(|n| {
                    *index.entry(n.clone()).or_insert_with(|| {
                        nodes.push(n);
                        nodes.len() - 1
                    })
                })
                .collect();
            FlatDevice {
                name: d.name,
                kind: d.kind,
                nodes: ids,
                value: d.value,
                model: d.model,
                params: d.params,
            }
        })
        .collect();
    Ok(FlatCircuit {
        devices,
        nodes,
        models: ex.models,
    })
}
