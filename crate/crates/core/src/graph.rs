//! Tree-structured part graphs.
//!
//! Two standard trees are provided. The upper-constrained tree is the usual
//! kinematic tree rooted at the head, where left and right sides meet at the
//! neck. The lower-constrained tree joins the two sides through a pair of
//! pelvis nodes and carries two head nodes, one hanging off each shoulder.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{PoseError, Result};
use crate::geometry::Point;

/// Number of annotated keypoints per person.
pub const NUM_KEYPOINTS: usize = 14;

/// Annotation keypoint order.
pub mod kp {
    pub const HEAD: usize = 0;
    pub const NECK: usize = 1;
    pub const L_SHOULDER: usize = 2;
    pub const R_SHOULDER: usize = 3;
    pub const L_ELBOW: usize = 4;
    pub const R_ELBOW: usize = 5;
    pub const L_WRIST: usize = 6;
    pub const R_WRIST: usize = 7;
    pub const L_HIP: usize = 8;
    pub const R_HIP: usize = 9;
    pub const L_KNEE: usize = 10;
    pub const R_KNEE: usize = 11;
    pub const L_ANKLE: usize = 12;
    pub const R_ANKLE: usize = 13;
}

pub const KEYPOINT_NAMES: [&str; NUM_KEYPOINTS] = [
    "head",
    "neck",
    "l_shoulder",
    "r_shoulder",
    "l_elbow",
    "r_elbow",
    "l_wrist",
    "r_wrist",
    "l_hip",
    "r_hip",
    "l_knee",
    "r_knee",
    "l_ankle",
    "r_ankle",
];

/// Keypoints treated as the lower body (hips, knees, ankles).
pub const LOWER_BODY_KEYPOINTS: [usize; 6] = [
    kp::L_HIP,
    kp::R_HIP,
    kp::L_KNEE,
    kp::R_KNEE,
    kp::L_ANKLE,
    kp::R_ANKLE,
];

pub fn is_lower_body_keypoint(k: usize) -> bool {
    LOWER_BODY_KEYPOINTS.contains(&k)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    fn sign(self) -> f64 {
        match self {
            Side::Left => -1.0,
            Side::Right => 1.0,
        }
    }
}

/// How a graph node is positioned relative to the 14 annotated keypoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeBinding {
    Keypoint(usize),
    /// Head point offset sideways, perpendicular to the neck-to-head axis.
    HeadSide(Side),
    /// Hip midpoint offset along the hip line.
    PelvisSide(Side),
    /// Not tied to the annotation (synthetic test graphs).
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BodyHalf {
    Upper,
    Lower,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TreeVariant {
    UpperConstrained,
    LowerConstrained,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartSpec {
    pub id: usize,
    pub name: String,
    pub binding: NodeBinding,
    pub num_types: usize,
    pub body_half: BodyHalf,
}

impl PartSpec {
    pub fn new(
        id: usize,
        name: impl Into<String>,
        binding: NodeBinding,
        num_types: usize,
        body_half: BodyHalf,
    ) -> Self {
        PartSpec {
            id,
            name: name.into(),
            binding,
            num_types,
            body_half,
        }
    }

    pub fn keypoint(&self) -> Option<usize> {
        match self.binding {
            NodeBinding::Keypoint(k) => Some(k),
            _ => None,
        }
    }

    pub fn is_auxiliary(&self) -> bool {
        matches!(
            self.binding,
            NodeBinding::HeadSide(_) | NodeBinding::PelvisSide(_)
        )
    }
}

/// Offsets used to place auxiliary nodes from the annotated keypoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuxOffsets {
    /// Pelvis nodes sit at the hip midpoint ± this fraction of the torso diameter.
    pub pelvis_ratio: f64,
    /// Head nodes sit at the head point ± this fraction of the head–neck distance.
    pub head_ratio: f64,
}

impl Default for AuxOffsets {
    fn default() -> Self {
        AuxOffsets {
            pelvis_ratio: 0.15,
            head_ratio: 0.5,
        }
    }
}

/// Left-shoulder to right-hip distance.
pub fn torso_diameter(keypoints: &[Point]) -> f64 {
    keypoints[kp::L_SHOULDER].distance(keypoints[kp::R_HIP])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GraphRepr", into = "GraphRepr")]
pub struct PartGraph {
    parts: Vec<PartSpec>,
    /// `(child, parent)` pairs; edge `e` is the `e`-th entry.
    edges: Vec<(usize, usize)>,
    root: usize,
    variant: TreeVariant,
    parent: Vec<Option<usize>>,
    parent_edge: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    /// Root first, every parent before its children.
    order: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct GraphRepr {
    parts: Vec<PartSpec>,
    edges: Vec<(usize, usize)>,
    root: usize,
    variant: TreeVariant,
}

impl TryFrom<GraphRepr> for PartGraph {
    type Error = PoseError;
    fn try_from(r: GraphRepr) -> Result<Self> {
        PartGraph::new(r.parts, r.edges, r.root, r.variant)
    }
}

impl From<PartGraph> for GraphRepr {
    fn from(g: PartGraph) -> Self {
        GraphRepr {
            parts: g.parts,
            edges: g.edges,
            root: g.root,
            variant: g.variant,
        }
    }
}

impl PartGraph {
    pub fn new(
        parts: Vec<PartSpec>,
        edges: Vec<(usize, usize)>,
        root: usize,
        variant: TreeVariant,
    ) -> Result<Self> {
        let n = parts.len();
        if n == 0 {
            return Err(PoseError::InvalidGraph("graph has no parts".into()));
        }
        for (i, p) in parts.iter().enumerate() {
            if p.id != i {
                return Err(PoseError::InvalidGraph(format!(
                    "part at position {i} has id {}",
                    p.id
                )));
            }
            if p.num_types == 0 {
                return Err(PoseError::InvalidGraph(format!(
                    "part {} has zero types",
                    p.name
                )));
            }
            if let NodeBinding::Keypoint(k) = p.binding {
                if k >= NUM_KEYPOINTS {
                    return Err(PoseError::InvalidGraph(format!(
                        "part {} bound to keypoint {k}",
                        p.name
                    )));
                }
            }
        }
        if root >= n {
            return Err(PoseError::InvalidGraph(format!("root {root} does not exist")));
        }
        if edges.len() != n - 1 {
            return Err(PoseError::InvalidGraph(format!(
                "{} edges for {n} parts; a tree needs {}",
                edges.len(),
                n - 1
            )));
        }
        let mut parent = vec![None; n];
        let mut parent_edge = vec![None; n];
        let mut children = vec![Vec::new(); n];
        for (e, &(c, p)) in edges.iter().enumerate() {
            if c >= n || p >= n {
                return Err(PoseError::InvalidGraph(format!(
                    "edge ({c},{p}) references a missing part"
                )));
            }
            if c == root {
                return Err(PoseError::InvalidGraph("root cannot have a parent".into()));
            }
            if c == p {
                return Err(PoseError::InvalidGraph(format!("self loop on part {c}")));
            }
            if parent[c].is_some() {
                return Err(PoseError::InvalidGraph(format!(
                    "part {c} has two parents"
                )));
            }
            parent[c] = Some(p);
            parent_edge[c] = Some(e);
            children[p].push(c);
        }
        let mut order = Vec::with_capacity(n);
        let mut queue = VecDeque::from([root]);
        while let Some(i) = queue.pop_front() {
            order.push(i);
            queue.extend(children[i].iter().copied());
        }
        if order.len() != n {
            return Err(PoseError::InvalidGraph(
                "edges do not connect every part to the root".into(),
            ));
        }
        let graph = PartGraph {
            parts,
            edges,
            root,
            variant,
            parent,
            parent_edge,
            children,
            order,
        };
        graph.check_variant()?;
        Ok(graph)
    }

    fn check_variant(&self) -> Result<()> {
        let count = |pred: &dyn Fn(&NodeBinding) -> bool| {
            self.parts.iter().filter(|p| pred(&p.binding)).count()
        };
        match self.variant {
            TreeVariant::LowerConstrained => {
                let pelvis = count(&|b| matches!(b, NodeBinding::PelvisSide(_)));
                let heads = count(&|b| {
                    matches!(b, NodeBinding::HeadSide(_) | NodeBinding::Keypoint(kp::HEAD))
                });
                if pelvis != 2 || heads != 2 {
                    return Err(PoseError::InvalidGraph(format!(
                        "lower-constrained tree needs two pelvis and two head nodes, found {pelvis} and {heads}"
                    )));
                }
            }
            TreeVariant::UpperConstrained => {
                let n = self.parts.len();
                let bound: Vec<_> = self.parts.iter().filter_map(|p| p.keypoint()).collect();
                if n != NUM_KEYPOINTS || bound.len() != NUM_KEYPOINTS {
                    return Err(PoseError::InvalidGraph(
                        "upper-constrained tree binds exactly the 14 keypoints".into(),
                    ));
                }
                // left and right meet through the shoulders: the path between the
                // shoulders must avoid the hips
                let path = self.path(kp::L_SHOULDER, kp::R_SHOULDER);
                if path.contains(&kp::L_HIP) || path.contains(&kp::R_HIP) {
                    return Err(PoseError::InvalidGraph(
                        "upper-constrained tree must join the sides above the hips".into(),
                    ));
                }
            }
            TreeVariant::Custom => {}
        }
        Ok(())
    }

    /// Nodes on the tree path from `a` to `b`, inclusive.
    pub fn path(&self, a: usize, b: usize) -> Vec<usize> {
        let ancestors = |mut i: usize| {
            let mut v = vec![i];
            while let Some(p) = self.parent[i] {
                v.push(p);
                i = p;
            }
            v
        };
        let pa = ancestors(a);
        let pb = ancestors(b);
        let common = *pa.iter().find(|n| pb.contains(n)).expect("tree is connected");
        let mut path: Vec<usize> = pa.iter().copied().take_while(|&n| n != common).collect();
        path.push(common);
        let tail: Vec<usize> = pb.iter().copied().take_while(|&n| n != common).collect();
        path.extend(tail.into_iter().rev());
        path
    }

    /// The conventional tree: head root, sides joined at the neck.
    pub fn upper_constrained(num_types: usize) -> Self {
        use kp::*;
        let parts = (0..NUM_KEYPOINTS)
            .map(|k| {
                let half = if is_lower_body_keypoint(k) {
                    BodyHalf::Lower
                } else {
                    BodyHalf::Upper
                };
                PartSpec::new(k, KEYPOINT_NAMES[k], NodeBinding::Keypoint(k), num_types, half)
            })
            .collect();
        let edges = vec![
            (NECK, HEAD),
            (L_SHOULDER, NECK),
            (R_SHOULDER, NECK),
            (L_ELBOW, L_SHOULDER),
            (R_ELBOW, R_SHOULDER),
            (L_WRIST, L_ELBOW),
            (R_WRIST, R_ELBOW),
            (L_HIP, L_SHOULDER),
            (R_HIP, R_SHOULDER),
            (L_KNEE, L_HIP),
            (R_KNEE, R_HIP),
            (L_ANKLE, L_KNEE),
            (R_ANKLE, R_KNEE),
        ];
        PartGraph::new(parts, edges, HEAD, TreeVariant::UpperConstrained)
            .expect("upper-constrained tree is valid")
    }

    /// The tree joined through two pelvis nodes, with a head node on each side.
    pub fn lower_constrained(num_types: usize) -> Self {
        use BodyHalf::*;
        use NodeBinding::*;
        let spec: [(&str, NodeBinding, BodyHalf); 17] = [
            ("pelvis_l", PelvisSide(Side::Left), Lower),
            ("pelvis_r", PelvisSide(Side::Right), Lower),
            ("l_hip", Keypoint(kp::L_HIP), Lower),
            ("r_hip", Keypoint(kp::R_HIP), Lower),
            ("l_knee", Keypoint(kp::L_KNEE), Lower),
            ("r_knee", Keypoint(kp::R_KNEE), Lower),
            ("l_ankle", Keypoint(kp::L_ANKLE), Lower),
            ("r_ankle", Keypoint(kp::R_ANKLE), Lower),
            ("l_shoulder", Keypoint(kp::L_SHOULDER), Upper),
            ("r_shoulder", Keypoint(kp::R_SHOULDER), Upper),
            ("l_elbow", Keypoint(kp::L_ELBOW), Upper),
            ("r_elbow", Keypoint(kp::R_ELBOW), Upper),
            ("l_wrist", Keypoint(kp::L_WRIST), Upper),
            ("r_wrist", Keypoint(kp::R_WRIST), Upper),
            ("head_l", HeadSide(Side::Left), Upper),
            ("head_r", HeadSide(Side::Right), Upper),
            ("neck", Keypoint(kp::NECK), Upper),
        ];
        let parts = spec
            .iter()
            .enumerate()
            .map(|(i, (name, b, h))| PartSpec::new(i, *name, *b, num_types, *h))
            .collect();
        let edges = vec![
            (1, 0),
            (2, 0),
            (3, 1),
            (4, 2),
            (5, 3),
            (6, 4),
            (7, 5),
            (8, 2),
            (9, 3),
            (10, 8),
            (11, 9),
            (12, 10),
            (13, 11),
            (14, 8),
            (15, 9),
            (16, 14),
        ];
        PartGraph::new(parts, edges, 0, TreeVariant::LowerConstrained)
            .expect("lower-constrained tree is valid")
    }

    /// A simple chain `0 <- 1 <- ... <- n-1` of free parts, rooted at 0.
    pub fn chain(n: usize, num_types: usize) -> Result<Self> {
        let parts = (0..n)
            .map(|i| PartSpec::new(i, format!("p{i}"), NodeBinding::Free, num_types, BodyHalf::Upper))
            .collect();
        let edges = (1..n).map(|i| (i, i - 1)).collect();
        PartGraph::new(parts, edges, 0, TreeVariant::Custom)
    }

    pub fn standard(variant: TreeVariant, num_types: usize) -> Result<Self> {
        match variant {
            TreeVariant::UpperConstrained => Ok(Self::upper_constrained(num_types)),
            TreeVariant::LowerConstrained => Ok(Self::lower_constrained(num_types)),
            TreeVariant::Custom => Err(PoseError::InvalidArgument(
                "custom graphs have no standard layout".into(),
            )),
        }
    }

    /// Same topology with every part given `num_types` mixture components.
    pub fn with_num_types(&self, num_types: usize) -> Result<Self> {
        let parts = self
            .parts
            .iter()
            .cloned()
            .map(|mut p| {
                p.num_types = num_types;
                p
            })
            .collect();
        PartGraph::new(parts, self.edges.clone(), self.root, self.variant)
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn parts(&self) -> &[PartSpec] {
        &self.parts
    }

    pub fn part(&self, i: usize) -> &PartSpec {
        &self.parts[i]
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn variant(&self) -> TreeVariant {
        self.variant
    }

    pub fn parent(&self, i: usize) -> Option<usize> {
        self.parent[i]
    }

    pub fn parent_edge(&self, i: usize) -> Option<usize> {
        self.parent_edge[i]
    }

    pub fn children(&self, i: usize) -> &[usize] {
        &self.children[i]
    }

    /// Topological order, root first.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        let mut v: Vec<usize> = self.parent[i].into_iter().collect();
        v.extend(self.children[i].iter().copied());
        v
    }

    /// Graph node bound to annotation keypoint `k`, if any.
    pub fn node_for_keypoint(&self, k: usize) -> Option<usize> {
        self.parts.iter().position(|p| p.keypoint() == Some(k))
    }

    /// Positions of every graph node derived from the 14 keypoints.
    pub fn node_positions(&self, keypoints: &[Point], offsets: &AuxOffsets) -> Vec<Point> {
        assert!(keypoints.len() >= NUM_KEYPOINTS, "need 14 keypoints");
        let torso = torso_diameter(keypoints);
        self.parts
            .iter()
            .map(|p| match p.binding {
                NodeBinding::Keypoint(k) => keypoints[k],
                NodeBinding::PelvisSide(side) => {
                    let (l, r) = (keypoints[kp::L_HIP], keypoints[kp::R_HIP]);
                    let mid = l.midpoint(r);
                    let v = r.sub(l);
                    let dir = if v.norm() > 0.0 {
                        v.scale(1.0 / v.norm())
                    } else {
                        Point::new(1.0, 0.0)
                    };
                    mid.add(dir.scale(side.sign() * offsets.pelvis_ratio * torso))
                }
                NodeBinding::HeadSide(side) => {
                    let (head, neck) = (keypoints[kp::HEAD], keypoints[kp::NECK]);
                    let axis = head.sub(neck);
                    let len = axis.norm();
                    let perp = if len > 0.0 {
                        Point::new(-axis.y / len, axis.x / len)
                    } else {
                        Point::new(1.0, 0.0)
                    };
                    // upright person: neck-to-head axis is (0,-1), perp is (1,0)
                    head.add(perp.scale(side.sign() * offsets.head_ratio * len))
                }
                NodeBinding::Free => Point::default(),
            })
            .collect()
    }

    /// Orientation of every node: the direction from its tree parent to it.
    /// The root uses the direction from its first child to the root.
    pub fn node_orientations(&self, positions: &[Point]) -> Vec<f64> {
        (0..self.len())
            .map(|i| match self.parent[i] {
                Some(p) => positions[i].sub(positions[p]).angle(),
                None => match self.children[i].first() {
                    Some(&c) => positions[i].sub(positions[c]).angle(),
                    None => 0.0,
                },
            })
            .collect()
    }

    /// Collapses per-node positions to the 14 annotated keypoints. The head is the
    /// mean of the side head nodes when no node is bound to it directly.
    pub fn keypoints_from_nodes(&self, positions: &[Point]) -> Vec<Point> {
        let mut out = vec![Point::new(f64::NAN, f64::NAN); NUM_KEYPOINTS];
        let mut heads = Vec::new();
        for (p, &pos) in self.parts.iter().zip(positions) {
            match p.binding {
                NodeBinding::Keypoint(k) => out[k] = pos,
                NodeBinding::HeadSide(_) => heads.push(pos),
                _ => {}
            }
        }
        if !out[kp::HEAD].is_finite() && !heads.is_empty() {
            let n = heads.len() as f64;
            let sum = heads.iter().fold(Point::default(), |a, &b| a.add(b));
            out[kp::HEAD] = sum.scale(1.0 / n);
        }
        out
    }
}
