//! Overlapping subdomains, oversampled extensions and the partition of unity.
//!
//! Subdomains start from a `jx * jy` grid of cell blocks and grow by whole
//! vertex-neighbour layers: one layer adds every element sharing a node with
//! the current set. The extension `Omega~_j` is `Omega_j` grown by
//! `oversample` more layers. Extension by zero is nodal.

use std::fmt::Write as _;

use crate::assembly::{element_set_boundary, element_set_dofs, DofMap};
use crate::error::{config, Error, Result};
use crate::linalg::{C64, ZERO};
use crate::mesh::Mesh;

#[derive(Debug, Clone)]
pub struct Subdomain {
    pub id: usize,
    /// Elements of `Omega_j`, sorted.
    pub elems: Vec<usize>,
    /// Elements of the oversampled extension, sorted.
    pub elems_ext: Vec<usize>,
    pub dofs: DofMap,
    pub dofs_ext: DofMap,
    /// Global nodes on the part of the boundary of `Omega_j` interior to the domain.
    pub interface_dofs: Vec<usize>,
    /// Nodal partition-of-unity weights, indexed like `dofs`.
    pub chi: Vec<f64>,
    /// Position of each `dofs` entry inside `dofs_ext`.
    local_in_ext: Vec<usize>,
}

impl Subdomain {
    pub fn n_local(&self) -> usize {
        self.dofs.len()
    }

    pub fn n_ext(&self) -> usize {
        self.dofs_ext.len()
    }

    pub fn is_interface(&self, global: usize) -> bool {
        self.interface_dofs.binary_search(&global).is_ok()
    }

    pub fn local_in_ext(&self) -> &[usize] {
        &self.local_in_ext
    }

    /// Global vector restricted to `Omega_j` nodes.
    pub fn restrict_global(&self, u: &[C64]) -> Vec<C64> {
        restrict(u, None, &self.dofs)
    }

    /// Global vector restricted to `Omega~_j` nodes.
    pub fn restrict_global_ext(&self, u: &[C64]) -> Vec<C64> {
        restrict(u, None, &self.dofs_ext)
    }

    /// `Omega~_j` vector restricted to `Omega_j` nodes.
    pub fn ext_to_local(&self, v_ext: &[C64]) -> Vec<C64> {
        self.local_in_ext.iter().map(|&p| v_ext[p]).collect()
    }

    /// `Omega_j` vector extended by zero to `Omega~_j` nodes.
    pub fn local_to_ext(&self, v: &[C64]) -> Vec<C64> {
        let mut out = vec![ZERO; self.n_ext()];
        for (&p, &x) in self.local_in_ext.iter().zip(v) {
            out[p] = x;
        }
        out
    }

    /// `out += E_j (chi_j . v)`.
    pub fn add_weighted_extension(&self, v: &[C64], out: &mut [C64]) {
        for ((&g, &c), &x) in self.dofs.dofs.iter().zip(&self.chi).zip(v) {
            out[g] += x * c;
        }
    }

    /// `chi_j . v`.
    pub fn apply_chi(&self, v: &[C64]) -> Vec<C64> {
        v.iter().zip(&self.chi).map(|(x, &c)| x * c).collect()
    }
}

/// Values of `v` at the nodes of `target`. `space` is the index space of `v`,
/// `None` meaning global numbering.
pub fn restrict(v: &[C64], space: Option<&DofMap>, target: &DofMap) -> Vec<C64> {
    target
        .dofs
        .iter()
        .map(|&g| match space {
            None => v[g],
            Some(s) => v[s.local(g).expect("target node outside source space")],
        })
        .collect()
}

/// Nodal zero extension of `v` (indexed by `source`) into `space`
/// (`None` meaning global numbering of size `num_global`).
pub fn extend_by_zero(v: &[C64], source: &DofMap, space: Option<&DofMap>) -> Vec<C64> {
    let n = space.map_or(source.num_global(), DofMap::len);
    let mut out = vec![ZERO; n];
    for (&g, &x) in source.dofs.iter().zip(v) {
        let p = match space {
            None => g,
            Some(s) => s.local(g).expect("source node outside target space"),
        };
        out[p] = x;
    }
    out
}

#[derive(Debug, Clone)]
pub struct Partition {
    pub subdomains: Vec<Subdomain>,
    pub jx: usize,
    pub jy: usize,
    pub overlap: usize,
    pub oversample: usize,
    /// Subdomains whose node sets intersect, excluding self.
    pub neighbors: Vec<Vec<usize>>,
    /// Per node, the number of `Omega_j` containing it.
    pub multiplicity: Vec<usize>,
    /// Per node, the number of `Omega~_j` containing it.
    pub multiplicity_ext: Vec<usize>,
    pub warnings: Vec<String>,
}

impl Partition {
    pub fn len(&self) -> usize {
        self.subdomains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subdomains.is_empty()
    }

    /// Largest number of extended subdomains sharing one element.
    pub fn max_element_multiplicity_ext(&self, num_elements: usize) -> usize {
        let mut count = vec![0usize; num_elements];
        for s in &self.subdomains {
            for &e in &s.elems_ext {
                count[e] += 1;
            }
        }
        count.into_iter().max().unwrap_or(0)
    }

    /// `sum_j E_j (chi_j . R_j u)`; the identity for a valid partition of unity.
    pub fn recombine(&self, u: &[C64]) -> Vec<C64> {
        let mut out = vec![ZERO; u.len()];
        for s in &self.subdomains {
            s.add_weighted_extension(&s.restrict_global(u), &mut out);
        }
        out
    }

    /// Plain-text dump: per subdomain, sorted node lists and chi values.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for sub in &self.subdomains {
            let _ = writeln!(s, "subdomain {}", sub.id);
            let _ = writeln!(s, "elements {}", sub.elems.len());
            let _ = writeln!(s, "elements_ext {}", sub.elems_ext.len());
            let _ = writeln!(s, "dofs {}", join(&sub.dofs.dofs));
            let _ = writeln!(s, "dofs_ext {}", join(&sub.dofs_ext.dofs));
            let _ = writeln!(s, "interface {}", join(&sub.interface_dofs));
            let chi: Vec<String> = sub.chi.iter().map(|c| format!("{c:.17e}")).collect();
            let _ = writeln!(s, "chi {}", chi.join(" "));
        }
        s
    }
}

fn join(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(" ")
}

/// Grows an element set by one vertex-neighbour layer.
fn grow(mesh: &Mesh, member: &mut [bool]) {
    let mut touched = vec![false; mesh.num_nodes()];
    for (e, _) in member.iter().enumerate().filter(|(_, &m)| m) {
        for n in mesh.elements[e] {
            touched[n] = true;
        }
    }
    for (n, _) in touched.iter().enumerate().filter(|(_, &t)| t) {
        for e in mesh.node_elements(n) {
            member[e] = true;
        }
    }
}

fn stripe_starts(cells: usize, parts: usize) -> Vec<usize> {
    (0..=parts).map(|s| s * cells / parts).collect()
}

fn collect(member: &[bool]) -> Vec<usize> {
    member.iter().enumerate().filter(|(_, &m)| m).map(|(e, _)| e).collect()
}

/// Overlapping decomposition of `mesh` into a `jx * jy` grid of subdomains,
/// with partition-of-unity weights already built.
pub fn partition(mesh: &Mesh, jx: usize, jy: usize, overlap: usize, oversample: usize) -> Result<Partition> {
    if jx == 0 || jy == 0 {
        return config(format!("subdomain grid must be nonempty, got {jx}x{jy}"));
    }
    if overlap == 0 {
        return config("overlap must be at least one layer");
    }
    if oversample == 0 {
        return config("oversample must be at least one layer");
    }
    if jx > mesh.nx || jy > mesh.ny {
        return config(format!("{jx}x{jy} subdomains do not fit a {}x{} grid", mesh.nx, mesh.ny));
    }

    let xs = stripe_starts(mesh.nx, jx);
    let ys = stripe_starts(mesh.ny, jy);
    let ne = mesh.num_elements();
    let mut subdomains = Vec::with_capacity(jx * jy);
    let mut warnings = Vec::new();

    for sy in 0..jy {
        for sx in 0..jx {
            let id = sy * jx + sx;
            let mut member = vec![false; ne];
            for cj in ys[sy]..ys[sy + 1] {
                for ci in xs[sx]..xs[sx + 1] {
                    let base = 2 * (cj * mesh.nx + ci);
                    member[base] = true;
                    member[base + 1] = true;
                }
            }
            for _ in 0..overlap {
                grow(mesh, &mut member);
            }
            let elems = collect(&member);
            for _ in 0..oversample {
                grow(mesh, &mut member);
            }
            let elems_ext = collect(&member);

            if elems.len() == ne && jx * jy > 1 {
                warnings.push(format!("subdomain {id} covers the whole domain"));
            }

            let dofs = element_set_dofs(mesh, &elems);
            let dofs_ext = element_set_dofs(mesh, &elems_ext);
            let (_, cut) = element_set_boundary(mesh, &elems);
            let mut interface_dofs: Vec<usize> = cut.iter().flatten().copied().collect();
            interface_dofs.sort_unstable();
            interface_dofs.dedup();
            let local_in_ext = dofs.dofs.iter().map(|&g| dofs_ext.local(g).unwrap()).collect();
            let n_local = dofs.len();
            subdomains.push(Subdomain {
                id,
                elems,
                elems_ext,
                dofs,
                dofs_ext,
                interface_dofs,
                chi: vec![0.0; n_local],
                local_in_ext,
            });
        }
    }

    let nn = mesh.num_nodes();
    let mut multiplicity = vec![0; nn];
    let mut multiplicity_ext = vec![0; nn];
    for s in &subdomains {
        s.dofs.dofs.iter().for_each(|&g| multiplicity[g] += 1);
        s.dofs_ext.dofs.iter().for_each(|&g| multiplicity_ext[g] += 1);
    }

    let neighbors = (0..subdomains.len())
        .map(|j| {
            (0..subdomains.len())
                .filter(|&k| k != j && subdomains[j].dofs.dofs.iter().any(|&g| subdomains[k].dofs.contains(g)))
                .collect()
        })
        .collect();

    let mut p = Partition {
        subdomains,
        jx,
        jy,
        overlap,
        oversample,
        neighbors,
        multiplicity,
        multiplicity_ext,
        warnings,
    };
    build_pou(&mut p)?;
    Ok(p)
}

/// Normalised multiplicity weights, forced to zero on interface nodes.
pub fn build_pou(p: &mut Partition) -> Result<()> {
    let nn = p.multiplicity.len();
    let mut total = vec![0.0_f64; nn];
    for s in &p.subdomains {
        for &g in &s.dofs.dofs {
            if !s.is_interface(g) {
                total[g] += 1.0;
            }
        }
    }
    if let Some(g) = total.iter().position(|&t| t == 0.0) {
        return Err(Error::Numerical(format!("node {g} has no positive partition-of-unity weight")));
    }
    for s in &mut p.subdomains {
        let chi = s
            .dofs
            .dofs
            .iter()
            .map(|&g| if s.interface_dofs.binary_search(&g).is_ok() { 0.0 } else { 1.0 / total[g] })
            .collect();
        s.chi = chi;
    }
    Ok(())
}
