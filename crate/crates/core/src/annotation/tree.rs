//! Serialized parse trees: node labels in pre-order, `/` closing each node.
//!
//! ```text
//! A(B, C)  <->  "A B / C / /"
//! ```

use std::collections::HashSet;
use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{RavenError, Result};
use crate::grammar::{
    slots, Attribute, ComponentKind, ComponentState, Entity, FigureConfiguration, LayoutKind, PanelState, Structure,
    ANGLE_VALUES, COLOR_VALUES, SIZE_VALUES, TYPE_NAMES,
};

pub const END: &str = "/";

/// Committed token vocabulary, one token per line.
pub const VOCABULARY_FILE: &str = include_str!("../../vocab.txt");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tree {
    pub label: String,
    pub children: Vec<Tree>,
}

/// Token stream of a serialized tree.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SerializedTree(pub String);

impl fmt::Display for SerializedTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A parsed node remembering where its label appeared.
struct Node<'a> {
    label: &'a str,
    position: usize,
    children: Vec<Node<'a>>,
}

fn parse_error(position: usize, message: impl Into<String>) -> RavenError {
    RavenError::Parse {
        position,
        message: message.into(),
    }
}

fn parse_nodes(text: &str) -> Result<Node<'_>> {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    let mut stack: Vec<Node> = Vec::new();
    for (position, token) in tokens.iter().copied().enumerate() {
        if token != END {
            stack.push(Node {
                label: token,
                position,
                children: Vec::new(),
            });
            continue;
        }
        let node = stack
            .pop()
            .ok_or_else(|| parse_error(position, "`/` closes no open branch"))?;
        match stack.last_mut() {
            Some(parent) => parent.children.push(node),
            None if position + 1 == tokens.len() => return Ok(node),
            None => return Err(parse_error(position + 1, "tokens after the root closed")),
        }
    }
    Err(parse_error(
        tokens.len(),
        if tokens.is_empty() {
            "empty tree".to_string()
        } else {
            format!("{} unclosed branch(es)", stack.len())
        },
    ))
}

impl Tree {
    pub fn leaf(label: impl Into<String>) -> Self {
        Tree {
            label: label.into(),
            children: Vec::new(),
        }
    }

    pub fn node(label: impl Into<String>, children: Vec<Tree>) -> Self {
        Tree {
            label: label.into(),
            children,
        }
    }

    pub fn tokens(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.push_tokens(&mut out);
        out
    }

    fn push_tokens<'a>(&'a self, out: &mut Vec<&'a str>) {
        out.push(&self.label);
        for child in &self.children {
            child.push_tokens(out);
        }
        out.push(END);
    }

    pub fn serialize(&self) -> SerializedTree {
        SerializedTree(self.tokens().join(" "))
    }

    pub fn parse(text: &str) -> Result<Tree> {
        fn own(node: Node) -> Tree {
            Tree {
                label: node.label.to_string(),
                children: node.children.into_iter().map(own).collect(),
            }
        }
        parse_nodes(text).map(own)
    }
}

fn number_token(n: usize) -> String {
    n.to_string()
}

fn slot_token(slot: usize) -> String {
    slot.to_string()
}

fn size_token(level: usize) -> String {
    format!("{:.1}", SIZE_VALUES[level])
}

fn color_token(level: usize) -> String {
    COLOR_VALUES[level].to_string()
}

fn angle_token(level: usize) -> String {
    ANGLE_VALUES[level].to_string()
}

fn bool_token(b: bool) -> &'static str {
    if b {
        "true"
    } else {
        "false"
    }
}

/// Every token serialization may emit, in a fixed order.
pub fn vocabulary() -> &'static [String] {
    static VOCAB: OnceLock<Vec<String>> = OnceLock::new();
    VOCAB.get_or_init(|| {
        let mut out: Vec<String> = vec!["Scene".into(), END.into()];
        out.extend(Structure::ALL.iter().map(|s| s.name().to_string()));
        out.extend(ComponentKind::ALL.iter().map(|c| c.name().to_string()));
        out.extend(LayoutKind::ALL.iter().map(|l| l.name().to_string()));
        out.extend(
            [
                "Number",
                "Position",
                "Uniformity",
                "Entity",
                "Type",
                "Size",
                "Color",
                "Angle",
            ]
            .map(String::from),
        );
        out.extend((0..9).map(slot_token));
        out.extend((1..=9).map(number_token));
        out.extend(["false", "true"].map(String::from));
        out.extend(TYPE_NAMES.iter().map(|t| t.to_string()));
        out.extend((0..SIZE_VALUES.len()).map(size_token));
        out.extend((0..COLOR_VALUES.len()).map(color_token));
        out.extend((0..ANGLE_VALUES.len()).map(angle_token));
        let mut seen = HashSet::new();
        out.retain(|t| seen.insert(t.clone()));
        out
    })
}

fn in_vocabulary(token: &str) -> bool {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| vocabulary().iter().map(String::as_str).collect())
        .contains(token)
}

fn valued(attribute: &str, value: impl Into<String>) -> Tree {
    Tree::node(attribute, vec![Tree::leaf(value)])
}

/// The parse tree of a panel.
pub fn panel_tree(panel: &PanelState) -> Tree {
    let components = panel
        .config
        .components()
        .iter()
        .zip(&panel.components)
        .map(|(spec, comp)| {
            let mut layout = vec![
                valued("Number", number_token(comp.number())),
                Tree::node(
                    "Position",
                    slots::to_slots(comp.position())
                        .into_iter()
                        .map(|s| Tree::leaf(slot_token(s)))
                        .collect(),
                ),
                valued("Uniformity", bool_token(comp.uniformity)),
            ];
            layout.extend(comp.entities.iter().map(|e| {
                Tree::node(
                    "Entity",
                    vec![
                        valued("Type", TYPE_NAMES[e.type_idx as usize]),
                        valued("Size", size_token(e.size_idx as usize)),
                        valued("Color", color_token(e.color_idx as usize)),
                        valued("Angle", angle_token(e.angle_idx as usize)),
                    ],
                )
            }));
            Tree::node(spec.kind.name(), vec![Tree::node(spec.layout_kind.name(), layout)])
        })
        .collect();
    Tree::node("Scene", vec![Tree::node(panel.config.structure().name(), components)])
}

pub fn serialize_tree(panel: &PanelState) -> SerializedTree {
    panel_tree(panel).serialize()
}

fn expect_label(node: &Node, label: &str) -> Result<()> {
    if node.label == label {
        Ok(())
    } else {
        Err(parse_error(
            node.position,
            format!("expected `{label}`, found `{}`", node.label),
        ))
    }
}

fn expect_children<'n, 'a>(node: &'n Node<'a>, count: usize) -> Result<&'n [Node<'a>]> {
    if node.children.len() == count {
        Ok(&node.children)
    } else {
        Err(parse_error(
            node.position,
            format!("`{}` needs {count} children, found {}", node.label, node.children.len()),
        ))
    }
}

/// The single value leaf under an attribute node, looked up in `table`.
fn value_index(node: &Node, attribute: &str, table: &[String]) -> Result<usize> {
    expect_label(node, attribute)?;
    let leaf = &expect_children(node, 1)?[0];
    if !leaf.children.is_empty() {
        return Err(parse_error(leaf.position, "attribute values are leaves"));
    }
    table
        .iter()
        .position(|t| t == leaf.label)
        .ok_or_else(|| parse_error(leaf.position, format!("`{}` is not a {attribute} value", leaf.label)))
}

fn table(f: impl Fn(usize) -> String, n: usize) -> Vec<String> {
    (0..n).map(f).collect()
}

fn parse_entity(node: &Node, slot: usize) -> Result<Entity> {
    expect_label(node, "Entity")?;
    let fields = expect_children(node, 4)?;
    let types: Vec<String> = TYPE_NAMES.iter().map(|t| t.to_string()).collect();
    Ok(Entity {
        slot: slot as u8,
        type_idx: value_index(&fields[0], "Type", &types)? as u8,
        size_idx: value_index(&fields[1], "Size", &table(size_token, SIZE_VALUES.len()))? as u8,
        color_idx: value_index(&fields[2], "Color", &table(color_token, COLOR_VALUES.len()))? as u8,
        angle_idx: value_index(&fields[3], "Angle", &table(angle_token, ANGLE_VALUES.len()))? as u8,
    })
}

fn parse_layout(node: &Node) -> Result<(LayoutKind, ComponentState)> {
    let kind = LayoutKind::ALL
        .into_iter()
        .find(|l| l.name() == node.label)
        .ok_or_else(|| parse_error(node.position, format!("`{}` is not a layout", node.label)))?;
    if node.children.len() < 3 {
        return Err(parse_error(
            node.position,
            "layout needs Number, Position and Uniformity",
        ));
    }
    let number = value_index(&node.children[0], "Number", &table(number_token, 10))?;
    let position_node = &node.children[1];
    expect_label(position_node, "Position")?;
    let mut occupied = Vec::new();
    for leaf in &position_node.children {
        let slot = table(slot_token, 9)
            .iter()
            .position(|t| t == leaf.label)
            .filter(|_| leaf.children.is_empty())
            .ok_or_else(|| parse_error(leaf.position, format!("`{}` is not a slot", leaf.label)))?;
        occupied.push(slot);
    }
    let uniformity = value_index(&node.children[2], "Uniformity", &["false".into(), "true".into()])? == 1;
    let entity_nodes = &node.children[3..];
    if number != occupied.len() || number != entity_nodes.len() {
        return Err(parse_error(
            node.position,
            format!(
                "Number {number} disagrees with {} positions and {} entities",
                occupied.len(),
                entity_nodes.len()
            ),
        ));
    }
    let entities = occupied
        .iter()
        .zip(entity_nodes)
        .map(|(slot, n)| parse_entity(n, *slot))
        .collect::<Result<Vec<_>>>()?;
    Ok((kind, ComponentState { uniformity, entities }))
}

/// Reconstructs a panel from its serialized tree.
pub fn parse_tree(text: &SerializedTree) -> Result<PanelState> {
    parse_panel(&text.0)
}

pub fn parse_panel(text: &str) -> Result<PanelState> {
    if let Some((position, token)) = text.split_whitespace().enumerate().find(|(_, t)| !in_vocabulary(t)) {
        return Err(parse_error(position, format!("unknown token `{token}`")));
    }
    let root = parse_nodes(text)?;
    expect_label(&root, "Scene")?;
    let structure_node = &expect_children(&root, 1)?[0];
    let structure = Structure::ALL
        .into_iter()
        .find(|s| s.name() == structure_node.label)
        .ok_or_else(|| {
            parse_error(
                structure_node.position,
                format!("`{}` is not a structure", structure_node.label),
            )
        })?;
    let mut layouts = Vec::new();
    let mut components = Vec::new();
    let mut kinds = Vec::new();
    for comp_node in &structure_node.children {
        let kind = ComponentKind::ALL
            .into_iter()
            .find(|k| k.name() == comp_node.label)
            .ok_or_else(|| parse_error(comp_node.position, format!("`{}` is not a component", comp_node.label)))?;
        let (layout, state) = parse_layout(&expect_children(comp_node, 1)?[0])?;
        kinds.push((kind, comp_node.position));
        layouts.push(layout);
        components.push(state);
    }
    let config = FigureConfiguration::from_parts(structure, &layouts)
        .ok_or_else(|| parse_error(structure_node.position, "no figure configuration has these layouts"))?;
    for (spec, (kind, position)) in config.components().iter().zip(&kinds) {
        if spec.kind != *kind {
            return Err(parse_error(
                *position,
                format!("expected component `{}`", spec.kind.name()),
            ));
        }
    }
    let panel = PanelState { config, components };
    panel
        .validate()
        .map_err(|e| parse_error(structure_node.position, e.to_string()))?;
    Ok(panel)
}

/// Value of one attribute node's leaf, used by tooling that inspects trees.
pub fn attribute_tokens(tree: &Tree, attribute: Attribute) -> Vec<String> {
    let mut out = Vec::new();
    fn walk(t: &Tree, name: &str, out: &mut Vec<String>) {
        if t.label == name {
            out.extend(t.children.iter().map(|c| c.label.clone()));
        }
        for c in &t.children {
            walk(c, name, out);
        }
    }
    let name = match attribute {
        Attribute::Orientation => "Angle",
        other => other.name(),
    };
    walk(tree, name, &mut out);
    out
}
