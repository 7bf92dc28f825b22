//! Conforming triangulations of the unit square with full facet topology.
//!
//! Every facet stores its two adjacent sides. The plus side is the adjacent
//! triangle with the lower index and the facet normal is the outward normal of
//! that triangle. Each side also records whether its counter-clockwise local edge
//! runs against the facet's canonical direction, which starts at the lower global
//! vertex index of the plus side. Periodically identified facets keep both
//! geometric copies through their two sides and are iterated like interior
//! facets.

use std::collections::HashMap;

use crate::error::MeshError;

/// Coordinate matching tolerance for walls and periodic partners.
pub const GEOMETRY_TOL: f64 = 1e-12;

/// A wall of the unit square.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Wall {
    Left,
    Right,
    Bottom,
    Top,
}

impl Wall {
    pub const ALL: [Wall; 4] = [Wall::Left, Wall::Right, Wall::Bottom, Wall::Top];
}

/// Periodic direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X1,
    X2,
}

impl Axis {
    fn walls(self) -> (Wall, Wall) {
        match self {
            Axis::X1 => (Wall::Left, Wall::Right),
            Axis::X2 => (Wall::Bottom, Wall::Top),
        }
    }

    fn shift(self) -> [f64; 2] {
        match self {
            Axis::X1 => [1.0, 0.0],
            Axis::X2 => [0.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FacetKind {
    Interior,
    Boundary(Wall),
    Periodic(Axis),
}

/// One side of a facet: the adjacent triangle and its local edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FacetSide {
    pub element: usize,
    /// Local edge index `i`, the edge opposite local vertex `i`.
    pub local_edge: usize,
    /// True when the counter-clockwise local edge runs against the facet's
    /// canonical direction.
    pub reversed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Facet {
    /// Canonical (start, end) vertices as seen from the plus side.
    pub vertices: [usize; 2],
    pub plus: FacetSide,
    pub minus: Option<FacetSide>,
    /// Unit normal, outward for the plus side.
    pub normal: [f64; 2],
    pub length: f64,
    pub kind: FacetKind,
}

impl Facet {
    /// Facets that the interior-facet loops visit: true interior and periodic.
    pub fn is_interior_like(&self) -> bool {
        !matches!(self.kind, FacetKind::Boundary(_))
    }

    pub fn wall(&self) -> Option<Wall> {
        match self.kind {
            FacetKind::Boundary(w) => Some(w),
            _ => None,
        }
    }

    pub fn sides(&self) -> impl Iterator<Item = FacetSide> + '_ {
        std::iter::once(self.plus).chain(self.minus)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<[f64; 2]>,
    /// Counter-clockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    pub facets: Vec<Facet>,
    /// Facet index of each local edge, per triangle.
    pub element_facets: Vec<[usize; 3]>,
    /// Element diameters h_K (longest edge).
    pub diameters: Vec<f64>,
    pub areas: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshStatistics {
    pub num_triangles: usize,
    pub num_facets: usize,
    pub h_max: f64,
    pub h_min: f64,
}

fn signed_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn close(a: [f64; 2], b: [f64; 2]) -> bool {
    (a[0] - b[0]).abs() <= GEOMETRY_TOL && (a[1] - b[1]).abs() <= GEOMETRY_TOL
}

/// Vertices (a, b) of local edge `i` in counter-clockwise order.
pub fn local_edge_vertices(tri: &[usize; 3], i: usize) -> [usize; 2] {
    [tri[(i + 1) % 3], tri[(i + 2) % 3]]
}

impl Mesh {
    /// Builds the mesh topology from counter-clockwise triangles.
    pub fn from_parts(vertices: Vec<[f64; 2]>, triangles: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        let mut areas = Vec::with_capacity(triangles.len());
        let mut diameters = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            let p = tri.map(|v| vertices[v]);
            let area = signed_area(p[0], p[1], p[2]);
            if area <= 0.0 {
                return Err(MeshError::Validation {
                    line: 0,
                    triangle: t,
                    message: format!("non-positive signed area {area:e}"),
                });
            }
            areas.push(area);
            diameters.push(dist(p[0], p[1]).max(dist(p[1], p[2])).max(dist(p[2], p[0])));
        }

        let mut index: HashMap<(usize, usize), usize> = HashMap::new();
        let mut sides: Vec<Vec<(usize, usize)>> = Vec::new();
        let mut element_facets = vec![[0usize; 3]; triangles.len()];
        for (t, tri) in triangles.iter().enumerate() {
            for i in 0..3 {
                let [a, b] = local_edge_vertices(tri, i);
                let key = (a.min(b), a.max(b));
                let f = *index.entry(key).or_insert_with(|| {
                    sides.push(Vec::new());
                    sides.len() - 1
                });
                if sides[f].len() == 2 {
                    return Err(MeshError::NonManifold(key.0, key.1));
                }
                sides[f].push((t, i));
                element_facets[t][i] = f;
            }
        }

        let mut facets = Vec::with_capacity(sides.len());
        for s in &sides {
            // Triangles are visited in order, so s[0] has the lower index.
            let (tp, ip) = s[0];
            let [a, b] = local_edge_vertices(&triangles[tp], ip);
            let start = a.min(b);
            let end = a.max(b);
            let plus = FacetSide { element: tp, local_edge: ip, reversed: a != start };
            let minus = s.get(1).map(|&(tm, im)| {
                let [c, _] = local_edge_vertices(&triangles[tm], im);
                FacetSide { element: tm, local_edge: im, reversed: c != start }
            });
            let (pa, pb) = (vertices[a], vertices[b]);
            let length = dist(pa, pb);
            let normal = [(pb[1] - pa[1]) / length, -(pb[0] - pa[0]) / length];
            let kind = if minus.is_some() { FacetKind::Interior } else { FacetKind::Boundary(classify_wall(pa, pb)?) };
            facets.push(Facet { vertices: [start, end], plus, minus, normal, length, kind });
        }

        Ok(Mesh { vertices, triangles, facets, element_facets, diameters, areas })
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Physical coordinates of the three vertices of triangle `t`.
    pub fn triangle_points(&self, t: usize) -> [[f64; 2]; 3] {
        self.triangles[t].map(|v| self.vertices[v])
    }

    /// Canonical (start, end) vertex indices of a facet as seen from `side`.
    pub fn side_vertices(&self, side: FacetSide) -> [usize; 2] {
        let [a, b] = local_edge_vertices(&self.triangles[side.element], side.local_edge);
        if side.reversed {
            [b, a]
        } else {
            [a, b]
        }
    }

    pub fn num_boundary_facets(&self) -> usize {
        self.facets.iter().filter(|f| !f.is_interior_like()).count()
    }

    pub fn is_fully_periodic(&self) -> bool {
        self.num_boundary_facets() == 0
    }

    pub fn has_wall(&self, wall: Wall) -> bool {
        self.facets.iter().any(|f| f.wall() == Some(wall))
    }

    pub fn statistics(&self) -> Result<MeshStatistics, MeshError> {
        if self.triangles.is_empty() {
            return Err(MeshError::Empty);
        }
        let h_max = self.diameters.iter().cloned().fold(f64::MIN, f64::max);
        let h_min = self.diameters.iter().cloned().fold(f64::MAX, f64::min);
        Ok(MeshStatistics { num_triangles: self.triangles.len(), num_facets: self.facets.len(), h_max, h_min })
    }

    /// Serialises the mesh in the `hdivmesh 1` text format.
    pub fn to_text(&self) -> String {
        let mut s = String::from("hdivmesh 1\n");
        s.push_str(&format!("{}\n", self.vertices.len()));
        for v in &self.vertices {
            s.push_str(&format!("{} {}\n", v[0], v[1]));
        }
        s.push_str(&format!("{}\n", self.triangles.len()));
        for t in &self.triangles {
            s.push_str(&format!("{} {} {}\n", t[0], t[1], t[2]));
        }
        s
    }

    /// Marks matching boundary facets on opposite walls as periodic pairs.
    ///
    /// Applying the identification to an already identified axis is a no-op.
    pub fn apply_periodic_identification(&self, axes: &[Axis]) -> Result<Mesh, MeshError> {
        let mut facets = self.facets.clone();
        let mut removed = vec![false; facets.len()];
        for &axis in axes {
            let (low_wall, high_wall) = axis.walls();
            let shift = axis.shift();
            let lows: Vec<usize> = (0..facets.len()).filter(|&f| !removed[f] && facets[f].wall() == Some(low_wall)).collect();
            let mut highs: Vec<usize> =
                (0..facets.len()).filter(|&f| !removed[f] && facets[f].wall() == Some(high_wall)).collect();

            for &lf in &lows {
                let [a, b] = facets[lf].vertices;
                let pa = translate(self.vertices[a], shift);
                let pb = translate(self.vertices[b], shift);
                let found = highs.iter().position(|&hf| {
                    let [c, d] = facets[hf].vertices;
                    let (pc, pd) = (self.vertices[c], self.vertices[d]);
                    (close(pa, pc) && close(pb, pd)) || (close(pa, pd) && close(pb, pc))
                });
                let Some(pos) = found else {
                    let m = self.midpoint(&facets[lf]);
                    return Err(MeshError::Periodic { x: m[0], y: m[1] });
                };
                let hf = highs.swap_remove(pos);
                let merged = self.merge_periodic(&facets[lf], &facets[hf], axis);
                facets[lf] = merged;
                removed[hf] = true;
            }
            if let Some(&hf) = highs.first() {
                let m = self.midpoint(&facets[hf]);
                return Err(MeshError::Periodic { x: m[0], y: m[1] });
            }
        }

        let kept: Vec<Facet> = facets.into_iter().zip(&removed).filter(|(_, &r)| !r).map(|(f, _)| f).collect();
        let mut element_facets = vec![[usize::MAX; 3]; self.triangles.len()];
        for (f, facet) in kept.iter().enumerate() {
            for side in facet.sides() {
                element_facets[side.element][side.local_edge] = f;
            }
        }
        debug_assert!(element_facets.iter().all(|e| e.iter().all(|&f| f != usize::MAX)));
        Ok(Mesh {
            vertices: self.vertices.clone(),
            triangles: self.triangles.clone(),
            facets: kept,
            element_facets,
            diameters: self.diameters.clone(),
            areas: self.areas.clone(),
        })
    }

    fn merge_periodic(&self, low: &Facet, high: &Facet, axis: Axis) -> Facet {
        let (first, second) = if low.plus.element <= high.plus.element { (low, high) } else { (high, low) };
        let plus = first.plus;
        let [a, b] = local_edge_vertices(&self.triangles[plus.element], plus.local_edge);
        let start = a.min(b);
        let end = a.max(b);
        let plus = FacetSide { reversed: a != start, ..plus };
        // The minus side starts at the periodic image of the plus start vertex.
        let sign = if std::ptr::eq(first, low) { 1.0 } else { -1.0 };
        let shift = axis.shift().map(|s| s * sign);
        let image = translate(self.vertices[start], shift);
        let m = second.plus;
        let [c, _] = local_edge_vertices(&self.triangles[m.element], m.local_edge);
        let minus = FacetSide { reversed: !close(self.vertices[c], image), ..m };
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        let length = dist(pa, pb);
        Facet {
            vertices: [start, end],
            plus,
            minus: Some(minus),
            normal: [(pb[1] - pa[1]) / length, -(pb[0] - pa[0]) / length],
            length,
            kind: FacetKind::Periodic(axis),
        }
    }

    pub fn midpoint(&self, f: &Facet) -> [f64; 2] {
        let [a, b] = f.vertices;
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        [(pa[0] + pb[0]) / 2.0, (pa[1] + pb[1]) / 2.0]
    }
}

fn translate(p: [f64; 2], s: [f64; 2]) -> [f64; 2] {
    [p[0] + s[0], p[1] + s[1]]
}

fn classify_wall(a: [f64; 2], b: [f64; 2]) -> Result<Wall, MeshError> {
    let on = |x: f64, v: f64| (x - v).abs() <= GEOMETRY_TOL;
    if on(a[0], 0.0) && on(b[0], 0.0) {
        Ok(Wall::Left)
    } else if on(a[0], 1.0) && on(b[0], 1.0) {
        Ok(Wall::Right)
    } else if on(a[1], 0.0) && on(b[1], 0.0) {
        Ok(Wall::Bottom)
    } else if on(a[1], 1.0) && on(b[1], 1.0) {
        Ok(Wall::Top)
    } else {
        Err(MeshError::OffWall { x: (a[0] + b[0]) / 2.0, y: (a[1] + b[1]) / 2.0 })
    }
}

/// Uniform n x n grid with every cell split along its (0,0)-(1,1) diagonal.
pub fn structured_triangulation(n: usize) -> Mesh {
    assert!(n >= 1, "structured_triangulation needs n >= 1");
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            vertices.push([i as f64 / n as f64, j as f64 / n as f64]);
        }
    }
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            triangles.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            triangles.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    Mesh::from_parts(vertices, triangles).expect("structured mesh is valid")
}

/// Parses the `hdivmesh 1` ASCII format, reorienting clockwise triangles.
pub fn load_mesh(text: &str) -> Result<Mesh, MeshError> {
    let significant: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
        .collect();
    let last_line = text.lines().count().max(1);
    let parse_err = |line: usize, message: String| MeshError::Parse { line, message };
    let mut it = significant.into_iter();

    let (line, header) = it.next().ok_or_else(|| parse_err(1, "empty input".into()))?;
    let mut words = header.split_whitespace();
    if words.next() != Some("hdivmesh") || words.next() != Some("1") || words.next().is_some() {
        return Err(parse_err(line, format!("expected header `hdivmesh 1`, got {header:?}")));
    }
    let (line, l) = it.next().ok_or_else(|| parse_err(last_line, "missing vertex count".into()))?;
    let nv: usize = l.parse().map_err(|_| parse_err(line, format!("invalid vertex count {l:?}")))?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (line, l) = it.next().ok_or_else(|| parse_err(last_line, "truncated vertex list".into()))?;
        let xs: Vec<f64> = l
            .split_whitespace()
            .map(|w| w.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| parse_err(line, format!("invalid vertex {l:?}")))?;
        if xs.len() != 2 {
            return Err(parse_err(line, format!("vertex needs 2 coordinates, got {}", xs.len())));
        }
        vertices.push([xs[0], xs[1]]);
    }
    let (line, l) = it.next().ok_or_else(|| parse_err(last_line, "missing triangle count".into()))?;
    let nt: usize = l.parse().map_err(|_| parse_err(line, format!("invalid triangle count {l:?}")))?;
    let mut triangles = Vec::with_capacity(nt);
    let mut tri_lines = Vec::with_capacity(nt);
    for t in 0..nt {
        let (line, l) = it.next().ok_or_else(|| parse_err(last_line, "truncated triangle list".into()))?;
        let ids: Vec<usize> = l
            .split_whitespace()
            .map(|w| w.parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|_| parse_err(line, format!("invalid triangle {l:?}")))?;
        if ids.len() != 3 {
            return Err(parse_err(line, format!("triangle needs 3 indices, got {}", ids.len())));
        }
        if let Some(&bad) = ids.iter().find(|&&v| v >= nv) {
            return Err(MeshError::Validation {
                line,
                triangle: t,
                message: format!("vertex index {bad} out of range (mesh has {nv} vertices)"),
            });
        }
        let mut tri = [ids[0], ids[1], ids[2]];
        let area = signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
        if area == 0.0 || !area.is_finite() {
            return Err(MeshError::Validation { line, triangle: t, message: "degenerate triangle with zero area".into() });
        }
        if area < 0.0 {
            tri.swap(1, 2);
        }
        triangles.push(tri);
        tri_lines.push(line);
    }
    if let Some((line, l)) = it.next() {
        return Err(parse_err(line, format!("unexpected trailing content {l:?}")));
    }
    Mesh::from_parts(vertices, triangles).map_err(|e| match e {
        MeshError::Validation { triangle, message, .. } => {
            MeshError::Validation { line: tri_lines.get(triangle).copied().unwrap_or(0), triangle, message }
        }
        other => other,
    })
}

/// Bucket grid over the unit square for locating points in the mesh.
pub struct PointLocator<'a> {
    mesh: &'a Mesh,
    n: usize,
    buckets: Vec<Vec<usize>>,
}

impl<'a> PointLocator<'a> {
    pub fn new(mesh: &'a Mesh) -> Self {
        let n = ((mesh.triangles.len() as f64).sqrt().ceil() as usize).max(1);
        let mut buckets = vec![Vec::new(); n * n];
        let cell = |x: f64| ((x * n as f64).floor().max(0.0) as usize).min(n - 1);
        for (t, _) in mesh.triangles.iter().enumerate() {
            let p = mesh.triangle_points(t);
            let (x0, x1) = (p.iter().map(|q| q[0]).fold(f64::MAX, f64::min), p.iter().map(|q| q[0]).fold(f64::MIN, f64::max));
            let (y0, y1) = (p.iter().map(|q| q[1]).fold(f64::MAX, f64::min), p.iter().map(|q| q[1]).fold(f64::MIN, f64::max));
            for j in cell(y0 - 1e-12)..=cell(y1 + 1e-12) {
                for i in cell(x0 - 1e-12)..=cell(x1 + 1e-12) {
                    buckets[j * n + i].push(t);
                }
            }
        }
        Self { mesh, n, buckets }
    }

    /// Returns the first triangle containing `x` and the reference coordinates.
    pub fn locate(&self, x: [f64; 2]) -> Option<(usize, [f64; 2])> {
        let n = self.n;
        let cell = |v: f64| ((v * n as f64).floor().max(0.0) as usize).min(n - 1);
        let bucket = &self.buckets[cell(x[1]) * n + cell(x[0])];
        for &t in bucket {
            let [a, b, c] = self.mesh.triangle_points(t);
            let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
            let dx = [x[0] - a[0], x[1] - a[1]];
            let xi = ((c[1] - a[1]) * dx[0] - (c[0] - a[0]) * dx[1]) / det;
            let eta = (-(b[1] - a[1]) * dx[0] + (b[0] - a[0]) * dx[1]) / det;
            let tol = 1e-12;
            if xi >= -tol && eta >= -tol && xi + eta <= 1.0 + tol {
                return Some((t, [xi.max(0.0), eta.max(0.0)]));
            }
        }
        None
    }
}
