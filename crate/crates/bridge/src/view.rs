//! What a client may see of a domain state.

use advisor_core::domains::Domain;

use crate::wire::{Cell, Facts, GridLayout, Observability};

const BAND: usize = 2;

pub fn layout(domain: &Domain) -> GridLayout {
    match domain {
        Domain::Tag(t) => GridLayout {
            width: t.grid.width,
            height: t.grid.height,
            cells: (0..t.grid.cell_count())
                .map(|i| tag_cell(domain, i))
                .collect(),
        },
        Domain::RockSample(r) => {
            let n = r.config.n;
            GridLayout {
                width: n,
                height: n,
                cells: (0..n * n).filter_map(|x| agent_cell(domain, x)).collect(),
            }
        }
    }
}

fn tag_cell(domain: &Domain, index: usize) -> Cell {
    let Domain::Tag(t) = domain else {
        unreachable!()
    };
    let (col, row) = t.grid.coords(index);
    Cell { index, col, row }
}

/// The agent's cell; `None` after a RockSample exit.
pub fn agent_cell(domain: &Domain, x: usize) -> Option<Cell> {
    match domain {
        Domain::Tag(_) => Some(tag_cell(domain, x)),
        Domain::RockSample(r) => r.coords(x).map(|(col, row)| Cell { index: x, col, row }),
    }
}

/// Facts about hidden state `y` filtered through `obs`.
pub fn facts(domain: &Domain, (x, y): (usize, usize), obs: Observability) -> Facts {
    match domain {
        Domain::Tag(t) => {
            let on_grid = y < t.grid.cell_count();
            match obs {
                Observability::Full => Facts::Tag {
                    opponent: on_grid.then(|| tag_cell(domain, y)),
                    band: None,
                },
                Observability::WallBand => {
                    let band = on_grid.then(|| {
                        let (c, r) = t.grid.coords(y);
                        if r + BAND >= t.grid.height {
                            Some("north")
                        } else if c < BAND {
                            Some("west")
                        } else if c + BAND >= t.grid.width {
                            Some("east")
                        } else {
                            None
                        }
                    });
                    Facts::Tag {
                        opponent: None,
                        band: band.flatten().map(str::to_owned),
                    }
                }
            }
        }
        Domain::RockSample(r) => Facts::Rocksample {
            rocks: rock_cells(domain),
            good: (obs == Observability::Full)
                .then(|| (0..r.config.k).map(|i| y >> i & 1 == 1).collect()),
            exited: x == r.exit(),
        },
    }
}

/// Facts revealing nothing hidden.
pub fn hidden_facts(domain: &Domain) -> Facts {
    match domain {
        Domain::Tag(_) => Facts::Tag {
            opponent: None,
            band: None,
        },
        Domain::RockSample(_) => Facts::Rocksample {
            rocks: rock_cells(domain),
            good: None,
            exited: false,
        },
    }
}

fn rock_cells(domain: &Domain) -> Vec<Cell> {
    let Domain::RockSample(r) = domain else {
        return Vec::new();
    };
    r.rocks
        .iter()
        .map(|&(col, row)| Cell {
            index: r.cell(col, row),
            col,
            row,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use advisor_core::domains::{DomainConfig, RockSampleConfig, TagConfig};

    #[test]
    fn wall_band_view_hides_the_opponent_cell() {
        let d = Domain::build(&DomainConfig::Tag(TagConfig::default())).unwrap();
        let Domain::Tag(t) = &d else { unreachable!() };
        let west = t.grid.index(0, 0).unwrap();
        let middle = t.grid.index(4, 0).unwrap();
        let top = t.grid.index(6, 4).unwrap();
        let band = |y| match facts(&d, (middle, y), Observability::WallBand) {
            Facts::Tag { opponent, band } => {
                assert_eq!(opponent, None);
                band
            }
            _ => unreachable!(),
        };
        assert_eq!(band(west).as_deref(), Some("west"));
        assert_eq!(band(top).as_deref(), Some("north"));
        assert_eq!(band(middle), None);
        assert_eq!(band(t.tagged()), None);
        match facts(&d, (middle, west), Observability::Full) {
            Facts::Tag { opponent, .. } => assert_eq!(opponent.unwrap().index, west),
            _ => unreachable!(),
        }
        assert_eq!(layout(&d).cells.len(), 29);
    }

    #[test]
    fn rock_qualities_only_under_full_view() {
        let d = Domain::build(&DomainConfig::Rocksample(RockSampleConfig::new(
            4, 2, 10.0, 0.0,
        )))
        .unwrap();
        let Domain::RockSample(r) = &d else {
            unreachable!()
        };
        match facts(&d, (r.start(), 0b10), Observability::Full) {
            Facts::Rocksample {
                good,
                rocks,
                exited,
            } => {
                assert_eq!(good, Some(vec![false, true]));
                assert_eq!(rocks.len(), 2);
                assert!(!exited);
            }
            _ => unreachable!(),
        }
        match facts(&d, (r.exit(), 0b10), Observability::WallBand) {
            Facts::Rocksample { good, exited, .. } => assert!(good.is_none() && exited),
            _ => unreachable!(),
        }
        assert_eq!(agent_cell(&d, r.exit()), None);
        assert_eq!(layout(&d).cells.len(), 16);
    }
}
