use serde::{Deserialize, Serialize};

use crate::evaluation::Deployment;
use crate::instance::ProblemInstance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MoveKind {
    SmallClose,
    SmallOpen,
    SmallSwap,
    MacroSameSiteSwap,
    MacroCrossSiteSwap,
}

impl MoveKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MoveKind::SmallClose => "small_close",
            MoveKind::SmallOpen => "small_open",
            MoveKind::SmallSwap => "small_swap",
            MoveKind::MacroSameSiteSwap => "macro_same_site_swap",
            MoveKind::MacroCrossSiteSwap => "macro_cross_site_swap",
        }
    }

    pub fn is_macro(self) -> bool {
        matches!(self, MoveKind::MacroSameSiteSwap | MoveKind::MacroCrossSiteSwap)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SiteChange {
    pub site: usize,
    pub from: Option<usize>,
    pub to: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Open,
    Close,
}

/// What a move does to one facility. The tabu list stores the reverse of
/// applied attributes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Attribute {
    pub site: usize,
    pub facility: usize,
    pub direction: Direction,
}

impl Attribute {
    pub fn reversed(self) -> Self {
        let direction = match self.direction {
            Direction::Open => Direction::Close,
            Direction::Close => Direction::Open,
        };
        Self { direction, ..self }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Move {
    pub kind: MoveKind,
    pub changes: Vec<SiteChange>,
}

impl Move {
    fn single(kind: MoveKind, site: usize, from: Option<usize>, to: Option<usize>) -> Self {
        Self {
            kind,
            changes: vec![SiteChange { site, from, to }],
        }
    }

    pub fn attributes(&self) -> impl Iterator<Item = Attribute> + '_ {
        self.changes.iter().flat_map(|c| {
            let close = c.from.map(|facility| Attribute {
                site: c.site,
                facility,
                direction: Direction::Close,
            });
            let open = c.to.map(|facility| Attribute {
                site: c.site,
                facility,
                direction: Direction::Open,
            });
            close.into_iter().chain(open)
        })
    }

    /// `(site, new facility)` pairs, as taken by the local evaluator.
    pub fn assignments(&self) -> Vec<(usize, Option<usize>)> {
        self.changes.iter().map(|c| (c.site, c.to)).collect()
    }

    pub fn apply(&self, y: &Deployment) -> Deployment {
        let mut out = y.clone();
        for c in &self.changes {
            debug_assert_eq!(out.get(c.site), c.from);
            out.set(c.site, c.to);
        }
        out
    }
}

/// Empty non-macro sites nearest to `from`, by distance then index.
pub fn nearest_empty_sites(y: &Deployment, inst: &ProblemInstance, from: usize, n: usize) -> Vec<usize> {
    let origin = inst.site(from).position;
    let mut empty: Vec<(f64, usize)> = inst
        .small_sites()
        .filter(|&i| i != from && y.get(i).is_none())
        .map(|i| (origin.distance(&inst.site(i).position), i))
        .collect();
    empty.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    empty.truncate(n);
    empty.into_iter().map(|(_, i)| i).collect()
}

/// Close, open and swap moves over the non-macro sites.
pub fn neighborhood_small(y: &Deployment, inst: &ProblemInstance, n_swap: usize) -> Vec<Move> {
    let mut moves = Vec::new();
    let open: Vec<(usize, usize)> = inst.small_sites().filter_map(|i| y.get(i).map(|k| (i, k))).collect();
    for &(i, k) in &open {
        moves.push(Move::single(MoveKind::SmallClose, i, Some(k), None));
    }
    for i in inst.small_sites().filter(|&i| y.get(i).is_none()) {
        for k in 0..inst.site(i).catalog.len() {
            moves.push(Move::single(MoveKind::SmallOpen, i, None, Some(k)));
        }
    }
    for &(i, k) in &open {
        for e in nearest_empty_sites(y, inst, i, n_swap) {
            for k2 in 0..inst.site(e).catalog.len() {
                moves.push(Move {
                    kind: MoveKind::SmallSwap,
                    changes: vec![
                        SiteChange {
                            site: i,
                            from: Some(k),
                            to: None,
                        },
                        SiteChange {
                            site: e,
                            from: None,
                            to: Some(k2),
                        },
                    ],
                });
            }
        }
    }
    moves
}

/// Type changes at one macro site, and type exchanges between two macro
/// sites. Exchanges between sites of the same type are dropped.
pub fn neighborhood_macro(y: &Deployment, inst: &ProblemInstance) -> Vec<Move> {
    let macros: Vec<(usize, usize)> = inst.macro_sites().filter_map(|i| y.get(i).map(|k| (i, k))).collect();
    let mut moves = Vec::new();
    for &(i, k) in &macros {
        for k2 in (0..inst.site(i).catalog.len()).filter(|&k2| k2 != k) {
            moves.push(Move::single(MoveKind::MacroSameSiteSwap, i, Some(k), Some(k2)));
        }
    }
    for (a, &(i, ki)) in macros.iter().enumerate() {
        for &(l, kl) in &macros[a + 1..] {
            let kind_i = inst.site(i).catalog[ki].kind;
            let kind_l = inst.site(l).catalog[kl].kind;
            if kind_i == kind_l {
                continue;
            }
            let (Some(new_i), Some(new_l)) = (inst.find_kind(i, kind_l), inst.find_kind(l, kind_i)) else {
                continue;
            };
            moves.push(Move {
                kind: MoveKind::MacroCrossSiteSwap,
                changes: vec![
                    SiteChange {
                        site: i,
                        from: Some(ki),
                        to: Some(new_i),
                    },
                    SiteChange {
                        site: l,
                        from: Some(kl),
                        to: Some(new_l),
                    },
                ],
            });
        }
    }
    moves
}
