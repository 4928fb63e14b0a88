//! Gmsh MSH 2.2 ASCII reader and writer.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use super::{Mesh, RegionTags, Tag};
use crate::error::{Error, Result};

/// Maps Gmsh physical group ids to mesh region markers. An empty map keeps
/// physical ids unchanged.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TagMap(pub BTreeMap<i32, Tag>);

impl TagMap {
    pub fn identity() -> Self {
        Self::default()
    }

    /// Parses `1=inlet,2=outlet,3=wall` or a JSON object such as
    /// `{"1": "inlet", "2": 12}`. Values are region names or integer tags.
    pub fn parse(text: &str, tags: &RegionTags) -> Result<Self> {
        let text = text.trim();
        let mut map = BTreeMap::new();
        let value_to_tag = |v: &str| -> Result<Tag> {
            let v = v.trim();
            v.parse::<Tag>()
                .ok()
                .or_else(|| tags.by_name(v))
                .ok_or_else(|| Error::InvalidTagMap(format!("unknown region '{v}'")))
        };
        let key_to_id = |k: &str| -> Result<i32> {
            k.trim()
                .parse::<i32>()
                .map_err(|_| Error::InvalidTagMap(format!("physical id '{k}' is not an integer")))
        };
        if text.starts_with('{') {
            let json: BTreeMap<String, serde_json::Value> =
                serde_json::from_str(text).map_err(|e| Error::InvalidTagMap(e.to_string()))?;
            for (k, v) in json {
                let tag = match v {
                    serde_json::Value::String(s) => value_to_tag(&s)?,
                    serde_json::Value::Number(n) => n
                        .as_i64()
                        .map(|n| n as Tag)
                        .ok_or_else(|| Error::InvalidTagMap(format!("tag {n} is not an integer")))?,
                    other => return Err(Error::InvalidTagMap(format!("unsupported value {other}"))),
                };
                map.insert(key_to_id(&k)?, tag);
            }
        } else {
            for entry in text.split([',', ';', '\n']).filter(|s| !s.trim().is_empty()) {
                let (k, v) = entry
                    .split_once(['=', ':'])
                    .ok_or_else(|| Error::InvalidTagMap(format!("entry '{entry}' is not key=value")))?;
                map.insert(key_to_id(k)?, value_to_tag(v)?);
            }
        }
        Ok(TagMap(map))
    }

    fn lookup(&self, physical: i32) -> Option<Tag> {
        if self.0.is_empty() {
            Some(physical)
        } else {
            self.0.get(&physical).copied()
        }
    }
}

pub fn read_gmsh(path: impl AsRef<Path>, tag_map: &TagMap) -> Result<Mesh> {
    let text = std::fs::read_to_string(path)?;
    parse_gmsh(&text, tag_map)
}

struct Element {
    kind: u32,
    physical: Option<i32>,
    nodes: Vec<usize>,
}

fn nodes_per_element(kind: u32) -> Option<usize> {
    match kind {
        15 => Some(1),
        1 => Some(2),
        2 => Some(3),
        4 => Some(4),
        _ => None,
    }
}

pub fn parse_gmsh(text: &str, tag_map: &TagMap) -> Result<Mesh> {
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
        .collect();
    let mut pos = 0;
    let err = |line: usize, message: String| Error::MshParse { line, message };

    let mut version_ok = false;
    let mut node_ids: HashMap<usize, usize> = HashMap::new();
    let mut coords: Vec<[f64; 3]> = Vec::new();
    let mut elements: Vec<Element> = Vec::new();

    while pos < lines.len() {
        let (line_no, header) = lines[pos];
        pos += 1;
        match header {
            "$MeshFormat" => {
                let (ln, fmt) = *lines.get(pos).ok_or_else(|| err(line_no, "truncated $MeshFormat".into()))?;
                let mut parts = fmt.split_whitespace();
                let version = parts.next().unwrap_or("");
                let file_type = parts.next().unwrap_or("");
                if !version.starts_with("2.2") {
                    return Err(Error::UnsupportedMshVersion(version.to_string()));
                }
                if file_type != "0" {
                    return Err(err(ln, "binary MSH files are not supported".into()));
                }
                version_ok = true;
                pos += 1;
                skip_to_end(&lines, &mut pos, "$EndMeshFormat")?;
            }
            "$Nodes" => {
                let count = parse_count(&lines, &mut pos)?;
                for _ in 0..count {
                    let (ln, l) = *lines.get(pos).ok_or_else(|| err(line_no, "truncated $Nodes".into()))?;
                    pos += 1;
                    let vals: Vec<&str> = l.split_whitespace().collect();
                    if vals.len() < 4 {
                        return Err(err(ln, "node line needs id x y z".into()));
                    }
                    let id: usize = vals[0].parse().map_err(|_| err(ln, "bad node id".into()))?;
                    let mut p = [0.0; 3];
                    for k in 0..3 {
                        p[k] = vals[k + 1].parse().map_err(|_| err(ln, "bad coordinate".into()))?;
                    }
                    node_ids.insert(id, coords.len());
                    coords.push(p);
                }
                skip_to_end(&lines, &mut pos, "$EndNodes")?;
            }
            "$Elements" => {
                let count = parse_count(&lines, &mut pos)?;
                for _ in 0..count {
                    let (ln, l) = *lines.get(pos).ok_or_else(|| err(line_no, "truncated $Elements".into()))?;
                    pos += 1;
                    let vals: Vec<i64> = l
                        .split_whitespace()
                        .map(|s| s.parse::<i64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| err(ln, "non-integer element entry".into()))?;
                    if vals.len() < 3 {
                        return Err(err(ln, "element line too short".into()));
                    }
                    let kind = vals[1] as u32;
                    let ntags = vals[2] as usize;
                    let nn = nodes_per_element(kind)
                        .ok_or_else(|| err(ln, format!("unsupported element type {kind}")))?;
                    if vals.len() != 3 + ntags + nn {
                        return Err(err(ln, "element line has the wrong number of entries".into()));
                    }
                    let physical = (ntags > 0).then(|| vals[3] as i32);
                    let mut nodes = Vec::with_capacity(nn);
                    for &id in &vals[3 + ntags..] {
                        let idx = node_ids
                            .get(&(id as usize))
                            .ok_or_else(|| err(ln, format!("unknown node {id}")))?;
                        nodes.push(*idx);
                    }
                    elements.push(Element { kind, physical, nodes });
                }
                skip_to_end(&lines, &mut pos, "$EndElements")?;
            }
            other if other.starts_with('$') && !other.starts_with("$End") => {
                // $PhysicalNames and other sections are not needed.
                let end = format!("$End{}", &other[1..]);
                skip_to_end(&lines, &mut pos, &end)?;
            }
            _ => return Err(err(line_no, format!("unexpected line '{header}'"))),
        }
    }

    if !version_ok {
        return Err(Error::UnsupportedMshVersion("missing $MeshFormat".into()));
    }

    let dim = if elements.iter().any(|e| e.kind == 4) {
        3
    } else if elements.iter().any(|e| e.kind == 2) {
        2
    } else {
        return Err(Error::InconsistentDimension(
            "file contains no triangle or tetrahedron cells".into(),
        ));
    };
    let (cell_kind, facet_kind) = if dim == 3 { (4, 2) } else { (2, 1) };
    if dim == 2 && coords.iter().any(|p| p[2] != 0.0) {
        return Err(Error::InconsistentDimension(
            "triangle mesh with non-zero z coordinates".into(),
        ));
    }

    // Compact the vertex numbering to the nodes referenced by cells.
    let mut remap = vec![usize::MAX; coords.len()];
    let mut vertices = Vec::new();
    let mut cells = Vec::new();
    for e in elements.iter().filter(|e| e.kind == cell_kind) {
        for &n in &e.nodes {
            if remap[n] == usize::MAX {
                remap[n] = vertices.len();
                vertices.push(coords[n]);
            }
            cells.push(remap[n]);
        }
    }

    let mut facet_tags: HashMap<Vec<usize>, Option<Tag>> = HashMap::new();
    for e in elements.iter().filter(|e| e.kind == facet_kind) {
        let mut key: Vec<usize> = e.nodes.iter().map(|&n| remap[n]).collect();
        if key.contains(&usize::MAX) {
            return Err(Error::InconsistentDimension(
                "facet element references a node that belongs to no cell".into(),
            ));
        }
        key.sort_unstable();
        let tag = e.physical.and_then(|p| tag_map.lookup(p));
        facet_tags.insert(key, tag);
    }

    Mesh::from_cells(dim, vertices, cells, |q| {
        let mut key = q.vertices.to_vec();
        key.sort_unstable();
        facet_tags.get(&key).copied().flatten()
    })
}

fn parse_count(lines: &[(usize, &str)], pos: &mut usize) -> Result<usize> {
    let (ln, l) = *lines.get(*pos).ok_or(Error::MshParse {
        line: 0,
        message: "unexpected end of file".into(),
    })?;
    *pos += 1;
    l.parse().map_err(|_| Error::MshParse {
        line: ln,
        message: format!("expected a count, found '{l}'"),
    })
}

fn skip_to_end(lines: &[(usize, &str)], pos: &mut usize, end: &str) -> Result<()> {
    while *pos < lines.len() {
        let (_, l) = lines[*pos];
        *pos += 1;
        if l == end {
            return Ok(());
        }
    }
    Err(Error::MshParse {
        line: lines.last().map(|l| l.0).unwrap_or(0),
        message: format!("missing {end}"),
    })
}

/// Writes boundary facets (physical tag = marker) followed by cells
/// (physical tag 0).
pub fn write_gmsh(mesh: &Mesh, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, to_gmsh_string(mesh))?;
    Ok(())
}

pub(crate) fn to_gmsh_string(mesh: &Mesh) -> String {
    let mut out = String::new();
    out.push_str("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n");
    let _ = writeln!(out, "{}", mesh.n_vertices());
    for (i, p) in mesh.vertices().iter().enumerate() {
        let _ = writeln!(out, "{} {:e} {:e} {:e}", i + 1, p[0], p[1], p[2]);
    }
    out.push_str("$EndNodes\n$Elements\n");
    let (cell_kind, facet_kind) = if mesh.dim() == 3 { (4, 2) } else { (2, 1) };
    let _ = writeln!(out, "{}", mesh.boundary_facets().len() + mesh.n_cells());
    let mut id = 1;
    for f in mesh.boundary_facets() {
        let _ = write!(out, "{id} {facet_kind} 2 {} {}", f.marker, f.marker);
        for &v in mesh.facet_vertices(f) {
            let _ = write!(out, " {}", v + 1);
        }
        out.push('\n');
        id += 1;
    }
    for cell in mesh.cells() {
        let _ = write!(out, "{id} {cell_kind} 2 0 0");
        for &v in cell {
            let _ = write!(out, " {}", v + 1);
        }
        out.push('\n');
        id += 1;
    }
    out.push_str("$EndElements\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_unit_square;

    const ONE_TET: &str = "$MeshFormat
2.2 0 8
$EndMeshFormat
$PhysicalNames
2
2 1 \"inlet\"
3 9 \"fluid\"
$EndPhysicalNames
$Nodes
4
1 0 0 0
2 1 0 0
3 0 1 0
4 0 0 1
$EndNodes
$Elements
5
1 2 2 1 1 1 2 3
2 2 2 2 2 1 2 4
3 2 2 3 3 1 3 4
4 2 2 3 3 2 3 4
5 4 2 9 1 1 2 3 4
$EndElements
";

    fn tag_map() -> TagMap {
        TagMap::parse("1=inlet,2=outlet,3=wall", &RegionTags::STANDARD).unwrap()
    }

    #[test]
    fn single_tetrahedron() {
        let mesh = parse_gmsh(ONE_TET, &tag_map()).unwrap();
        assert_eq!(mesh.dim(), 3);
        assert_eq!(mesh.boundary_facets().len(), 4);
        assert_eq!(mesh.interior_facets().len(), 0);
        let tags = RegionTags::STANDARD;
        for f in mesh.boundary_facets() {
            assert!([tags.inlet, tags.outlet, tags.wall].contains(&f.marker));
        }
    }

    #[test]
    fn missing_physical_tag_is_an_error() {
        let text = ONE_TET.replace("4 2 2 3 3 2 3 4", "4 2 0 2 3 4");
        assert!(matches!(parse_gmsh(&text, &tag_map()), Err(Error::UntaggedFacet { .. })));
    }

    #[test]
    fn unmapped_physical_tag_is_an_error() {
        let map = TagMap::parse("1=inlet,2=outlet", &RegionTags::STANDARD).unwrap();
        assert!(matches!(parse_gmsh(ONE_TET, &map), Err(Error::UntaggedFacet { .. })));
    }

    #[test]
    fn version_4_is_rejected() {
        let text = ONE_TET.replace("2.2 0 8", "4.1 0 8");
        assert!(matches!(parse_gmsh(&text, &tag_map()), Err(Error::UnsupportedMshVersion(_))));
    }

    #[test]
    fn lines_only_is_inconsistent() {
        let text = "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n2\n1 0 0 0\n2 1 0 0\n$EndNodes\n$Elements\n1\n1 1 2 1 1 1 2\n$EndElements\n";
        assert!(matches!(parse_gmsh(text, &tag_map()), Err(Error::InconsistentDimension(_))));
    }

    #[test]
    fn unit_square_round_trip() {
        let mesh = generate_unit_square(4).unwrap();
        let text = to_gmsh_string(&mesh);
        let back = parse_gmsh(&text, &TagMap::identity()).unwrap();
        assert_eq!(back.n_vertices(), mesh.n_vertices());
        assert_eq!(back.n_cells(), mesh.n_cells());
        assert_eq!(back.boundary_facets().len(), mesh.boundary_facets().len());
        let count = |m: &Mesh, t: Tag| m.boundary_facets().iter().filter(|f| f.marker == t).count();
        for t in RegionTags::STANDARD.sides() {
            assert_eq!(count(&back, t), count(&mesh, t));
        }
    }

    #[test]
    fn tag_map_json_and_text_agree() {
        let tags = RegionTags::STANDARD;
        let a = TagMap::parse("1=inlet, 2=outlet, 3=3", &tags).unwrap();
        let b = TagMap::parse(r#"{"1": "inlet", "2": "outlet", "3": 3}"#, &tags).unwrap();
        assert_eq!(a, b);
        assert!(TagMap::parse("1=nowhere", &tags).is_err());
    }
}
