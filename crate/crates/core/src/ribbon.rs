//! Ribbon graphs: discs with cyclically ordered band ends, joined by bands.
//!
//! Darts are band ends. Each island carries a cyclic order of its darts; a
//! bound dart has a partner at the other end of its band. Boundary circles
//! are traced by crossing a band and then stepping to the next dart around
//! the island, with a direction flip across twisted bands.

use serde::{Deserialize, Serialize};

/// Union-find over `0..n` with path halving.
#[derive(Debug, Clone)]
pub(crate) struct Dsu {
    parent: Vec<usize>,
}

impl Dsu {
    pub(crate) fn new(n: usize) -> Self {
        Dsu { parent: (0..n).collect() }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false if already joined.
    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[hi] = lo;
        true
    }

    /// Dense labels `0..k` in order of first appearance.
    pub(crate) fn labels(&mut self) -> (usize, Vec<usize>) {
        let n = self.parent.len();
        let mut label = vec![usize::MAX; n];
        let mut out = vec![0; n];
        let mut next = 0;
        for (x, slot) in out.iter_mut().enumerate() {
            let r = self.find(x);
            if label[r] == usize::MAX {
                label[r] = next;
                next += 1;
            }
            *slot = label[r];
        }
        (next, out)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RibbonGraph {
    /// Per island, its darts in cyclic (counterclockwise) order.
    pub rotations: Vec<Vec<usize>>,
    dart_island: Vec<usize>,
    partner: Vec<Option<usize>>,
    twisted: Vec<bool>,
}

/// One boundary circle, as the darts it leaves islands through, or an
/// island with no bound darts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryCircle {
    Darts(Vec<usize>),
    BareIsland(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Boundary {
    pub circles: Vec<BoundaryCircle>,
    /// Circle through each bound dart, for untwisted graphs; `None` for
    /// unbound darts or when some band is twisted.
    pub dart_circle: Vec<Option<usize>>,
}

impl RibbonGraph {
    pub fn new(islands: usize) -> Self {
        RibbonGraph {
            rotations: vec![Vec::new(); islands],
            dart_island: Vec::new(),
            partner: Vec::new(),
            twisted: Vec::new(),
        }
    }

    pub fn island_count(&self) -> usize {
        self.rotations.len()
    }

    pub fn dart_count(&self) -> usize {
        self.dart_island.len()
    }

    pub fn add_island(&mut self) -> usize {
        self.rotations.push(Vec::new());
        self.rotations.len() - 1
    }

    /// Appends a fresh unbound dart at the end of the island's order.
    pub fn push_dart(&mut self, island: usize) -> usize {
        let d = self.dart_island.len();
        self.dart_island.push(island);
        self.partner.push(None);
        self.twisted.push(false);
        self.rotations[island].push(d);
        d
    }

    /// Inserts a fresh unbound dart right after `after` in its island.
    pub fn insert_dart_after(&mut self, after: usize) -> usize {
        let island = self.dart_island[after];
        let d = self.dart_island.len();
        self.dart_island.push(island);
        self.partner.push(None);
        self.twisted.push(false);
        let pos = self.position(after);
        self.rotations[island].insert(pos + 1, d);
        d
    }

    fn position(&self, d: usize) -> usize {
        let island = self.dart_island[d];
        self.rotations[island].iter().position(|&x| x == d).expect("dart on its island")
    }

    pub fn island_of(&self, d: usize) -> usize {
        self.dart_island[d]
    }

    pub fn partner(&self, d: usize) -> Option<usize> {
        self.partner[d]
    }

    pub fn is_twisted(&self, d: usize) -> bool {
        self.twisted[d]
    }

    pub fn bind(&mut self, a: usize, b: usize, twisted: bool) {
        assert!(a != b, "a band needs two ends");
        assert!(self.partner[a].is_none() && self.partner[b].is_none(), "dart already bound");
        self.partner[a] = Some(b);
        self.partner[b] = Some(a);
        self.twisted[a] = twisted;
        self.twisted[b] = twisted;
    }

    /// Removes the band at `d`; both ends stay on their islands unbound.
    pub fn unbind(&mut self, d: usize) {
        if let Some(e) = self.partner[d].take() {
            self.partner[e] = None;
        }
    }

    /// Removes the dart from its island's order (unbinding it first).
    pub fn remove_dart(&mut self, d: usize) {
        self.unbind(d);
        let pos = self.position(d);
        let island = self.dart_island[d];
        self.rotations[island].remove(pos);
    }

    pub fn band_count(&self) -> usize {
        self.partner.iter().filter(|p| p.is_some()).count() / 2
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.island_count() as i64 - self.band_count() as i64
    }

    /// Next bound dart around the island, in direction `forward`.
    fn step(&self, d: usize, forward: bool) -> usize {
        let island = self.dart_island[d];
        let rot = &self.rotations[island];
        let n = rot.len();
        let mut pos = self.position(d);
        loop {
            pos = if forward { (pos + 1) % n } else { (pos + n - 1) % n };
            let e = rot[pos];
            if self.partner[e].is_some() {
                return e;
            }
        }
    }

    /// Boundary circles. Walks run over states (dart about to be crossed,
    /// direction of travel on the far island); every circle appears as two
    /// walks, one per direction, covering the same island corners. A corner
    /// is named by the dart it follows in counterclockwise order.
    pub fn boundary(&self) -> Boundary {
        let untwisted = !self.twisted.iter().any(|&t| t);
        let mut dart_circle = vec![None; self.dart_count()];
        let mut seen = vec![[false; 2]; self.dart_count()];
        let mut corner_taken = vec![false; self.dart_count()];
        let mut out = Vec::new();
        for dir in [true, false] {
            for d0 in 0..self.dart_count() {
                if self.partner[d0].is_none() || seen[d0][usize::from(dir)] {
                    continue;
                }
                let mut darts = Vec::new();
                let mut corners = Vec::new();
                let (mut d, mut fwd) = (d0, dir);
                while !seen[d][usize::from(fwd)] {
                    seen[d][usize::from(fwd)] = true;
                    darts.push(d);
                    let e = self.partner[d].expect("bound");
                    let walk = fwd ^ self.twisted[d];
                    let g = self.step(e, walk);
                    corners.push(if walk { e } else { g });
                    d = g;
                    fwd = walk;
                }
                if corners.iter().any(|&c| corner_taken[c]) {
                    continue;
                }
                for &c in &corners {
                    corner_taken[c] = true;
                }
                if untwisted {
                    for &x in &darts {
                        dart_circle[x] = Some(out.len());
                    }
                }
                out.push(BoundaryCircle::Darts(darts));
            }
        }
        for (island, rot) in self.rotations.iter().enumerate() {
            if rot.iter().all(|&d| self.partner[d].is_none()) {
                out.push(BoundaryCircle::BareIsland(island));
            }
        }
        Boundary { circles: out, dart_circle }
    }

    pub fn boundary_circle_count(&self) -> usize {
        self.boundary().circles.len()
    }

    /// Connected components over islands; returns (count, label per island).
    pub fn island_components(&self) -> (usize, Vec<usize>) {
        let mut dsu = Dsu::new(self.island_count());
        for d in 0..self.dart_count() {
            if let Some(e) = self.partner[d] {
                dsu.union(self.dart_island[d], self.dart_island[e]);
            }
        }
        dsu.labels()
    }

    /// Per component: orientable iff islands can be signed so that untwisted
    /// bands join equal signs and twisted bands opposite ones.
    pub fn component_orientability(&self) -> Vec<bool> {
        let (count, labels) = self.island_components();
        let mut sign: Vec<Option<bool>> = vec![None; self.island_count()];
        let mut ok = vec![true; count];
        for start in 0..self.island_count() {
            if sign[start].is_some() {
                continue;
            }
            sign[start] = Some(false);
            let mut stack = vec![start];
            while let Some(i) = stack.pop() {
                let si = sign[i].expect("signed");
                for &d in &self.rotations[i] {
                    let Some(e) = self.partner[d] else { continue };
                    let j = self.dart_island[e];
                    let want = si ^ self.twisted[d];
                    match sign[j] {
                        None => {
                            sign[j] = Some(want);
                            stack.push(j);
                        }
                        Some(sj) if sj != want => ok[labels[i]] = false,
                        Some(_) => {}
                    }
                }
            }
        }
        ok
    }
}
