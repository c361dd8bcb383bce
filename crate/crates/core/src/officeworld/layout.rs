use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub x: u8,
    pub y: u8,
}

impl Cell {
    pub const fn new(x: u8, y: u8) -> Self {
        Self { x, y }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Item {
    Coffee,
    Mail,
    Office,
    A,
    B,
    C,
    D,
    Decoration,
}

impl Item {
    pub const ALL: [Item; 8] = [
        Item::Coffee,
        Item::Mail,
        Item::Office,
        Item::A,
        Item::B,
        Item::C,
        Item::D,
        Item::Decoration,
    ];

    /// Observable symbol emitted by the labeling function.
    pub fn symbol(self) -> &'static str {
        match self {
            Item::Coffee => "coffee",
            Item::Mail => "mail",
            Item::Office => "office",
            Item::A => "A",
            Item::B => "B",
            Item::C => "C",
            Item::D => "D",
            Item::Decoration => "deco",
        }
    }

    fn to_char(self) -> char {
        match self {
            Item::Coffee => 'c',
            Item::Mail => 'm',
            Item::Office => 'o',
            Item::A => 'A',
            Item::B => 'B',
            Item::C => 'C',
            Item::D => 'D',
            Item::Decoration => '*',
        }
    }

    fn from_char(c: char) -> Option<Item> {
        Item::ALL.into_iter().find(|i| i.to_char() == c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Up,
    Down,
    Left,
    Right,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::Up, Action::Down, Action::Left, Action::Right];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Action {
        Action::ALL[i]
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LayoutError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("the map has no rows")]
    Empty,
    #[error("row {row} has width {found}, expected {expected}")]
    Ragged { row: usize, found: usize, expected: usize },
    #[error("the map needs exactly one start cell `S`, found {0}")]
    Start(usize),
    #[error("wall ({0},{1})-({2},{3}) is out of bounds or not between adjacent cells")]
    BadWall(u8, u8, u8, u8),
}

/// Walls, dimensions and item placements of one OfficeWorld grid.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GridLayout {
    width: usize,
    height: usize,
    items: Vec<Option<Item>>,
    start: Cell,
    walls: BTreeSet<(Cell, Cell)>,
    // blocked[cell][action]
    blocked: Vec<[bool; 4]>,
}

const DEFAULT_MAP: &str = include_str!("../../maps/default.map");

impl GridLayout {
    /// The 12 x 9 layout with four by three rooms shipped in `maps/default.map`.
    pub fn default_layout() -> Self {
        Self::parse(DEFAULT_MAP).expect("bundled map is valid")
    }

    pub fn new(
        width: usize,
        height: usize,
        items: Vec<Option<Item>>,
        start: Cell,
        walls: impl IntoIterator<Item = (Cell, Cell)>,
    ) -> Result<Self, LayoutError> {
        assert_eq!(items.len(), width * height);
        let mut set = BTreeSet::new();
        for (a, b) in walls {
            let inside = |c: Cell| (c.x as usize) < width && (c.y as usize) < height;
            let adjacent = a.x.abs_diff(b.x) + a.y.abs_diff(b.y) == 1;
            if !inside(a) || !inside(b) || !adjacent {
                return Err(LayoutError::BadWall(a.x, a.y, b.x, b.y));
            }
            set.insert((a.min(b), a.max(b)));
        }
        let mut layout = Self {
            width,
            height,
            items,
            start,
            walls: set,
            blocked: Vec::new(),
        };
        layout.blocked = (0..width * height)
            .map(|i| {
                let c = layout.cell_at(i);
                let mut b = [false; 4];
                for a in Action::ALL {
                    b[a.index()] = layout.raw_neighbor(c, a).is_none();
                }
                b
            })
            .collect();
        Ok(layout)
    }

    pub fn parse(text: &str) -> Result<Self, LayoutError> {
        let mut rows: Vec<(usize, &str)> = Vec::new();
        let mut walls = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(rest) = line.strip_prefix("wall:") {
                let w = parse_wall(rest).ok_or_else(|| LayoutError::Parse {
                    line: i + 1,
                    message: format!("expected `wall: (x1,y1)-(x2,y2)`, found `{line}`"),
                })?;
                walls.push(w);
            } else {
                rows.push((i + 1, line));
            }
        }
        if rows.is_empty() {
            return Err(LayoutError::Empty);
        }
        let width = rows[0].1.chars().count();
        let height = rows.len();
        let mut items = vec![None; width * height];
        let mut starts = Vec::new();
        for (r, (line_no, row)) in rows.iter().enumerate() {
            let found = row.chars().count();
            if found != width {
                return Err(LayoutError::Ragged {
                    row: r,
                    found,
                    expected: width,
                });
            }
            let y = (height - 1 - r) as u8;
            for (x, ch) in row.chars().enumerate() {
                let cell = Cell::new(x as u8, y);
                match ch {
                    '.' => {}
                    'S' => starts.push(cell),
                    other => {
                        let item = Item::from_char(other).ok_or_else(|| LayoutError::Parse {
                            line: *line_no,
                            message: format!("unknown map character `{other}`"),
                        })?;
                        items[y as usize * width + x] = Some(item);
                    }
                }
            }
        }
        if starts.len() != 1 {
            return Err(LayoutError::Start(starts.len()));
        }
        Self::new(width, height, items, starts[0], walls)
    }

    pub fn to_map_text(&self) -> String {
        let mut out = String::new();
        for y in (0..self.height).rev() {
            for x in 0..self.width {
                let c = Cell::new(x as u8, y as u8);
                let ch = if c == self.start {
                    'S'
                } else {
                    self.item_at(c).map_or('.', Item::to_char)
                };
                out.push(ch);
            }
            out.push('\n');
        }
        for (a, b) in &self.walls {
            writeln!(out, "wall: ({},{})-({},{})", a.x, a.y, b.x, b.y).unwrap();
        }
        out
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn num_cells(&self) -> usize {
        self.width * self.height
    }

    pub fn index(&self, c: Cell) -> usize {
        c.y as usize * self.width + c.x as usize
    }

    pub fn cell_at(&self, i: usize) -> Cell {
        Cell::new((i % self.width) as u8, (i / self.width) as u8)
    }

    pub fn start(&self) -> Cell {
        self.start
    }

    pub fn item_at(&self, c: Cell) -> Option<Item> {
        self.items[self.index(c)]
    }

    pub fn placements(&self, item: Item) -> Vec<Cell> {
        (0..self.num_cells())
            .filter(|&i| self.items[i] == Some(item))
            .map(|i| self.cell_at(i))
            .collect()
    }

    pub fn walls(&self) -> impl Iterator<Item = &(Cell, Cell)> {
        self.walls.iter()
    }

    fn raw_neighbor(&self, c: Cell, a: Action) -> Option<Cell> {
        let (x, y) = (c.x as i32, c.y as i32);
        let (nx, ny) = match a {
            Action::Up => (x, y + 1),
            Action::Down => (x, y - 1),
            Action::Left => (x - 1, y),
            Action::Right => (x + 1, y),
        };
        if nx < 0 || ny < 0 || nx >= self.width as i32 || ny >= self.height as i32 {
            return None;
        }
        let n = Cell::new(nx as u8, ny as u8);
        if self.walls.contains(&(c.min(n), c.max(n))) {
            None
        } else {
            Some(n)
        }
    }

    /// Cell reached by moving; walls and the border keep the agent in place.
    pub fn neighbor(&self, c: Cell, a: Action) -> Cell {
        if self.blocked[self.index(c)][a.index()] {
            c
        } else {
            self.raw_neighbor(c, a).unwrap()
        }
    }

    /// Cells reachable from the start without stepping on a decoration.
    pub fn safe_reachable(&self) -> Vec<bool> {
        let mut seen = vec![false; self.num_cells()];
        if self.item_at(self.start) == Some(Item::Decoration) {
            return seen;
        }
        seen[self.index(self.start)] = true;
        let mut queue = VecDeque::from([self.start]);
        while let Some(c) = queue.pop_front() {
            for a in Action::ALL {
                let n = self.neighbor(c, a);
                let i = self.index(n);
                if !seen[i] && self.item_at(n) != Some(Item::Decoration) {
                    seen[i] = true;
                    queue.push_back(n);
                }
            }
        }
        seen
    }

    /// True when every non-decoration item can be reached from the start
    /// without breaking a decoration.
    pub fn items_reachable(&self) -> bool {
        let seen = self.safe_reachable();
        (0..self.num_cells()).all(|i| match self.items[i] {
            Some(Item::Decoration) | None => true,
            Some(_) => seen[i],
        })
    }
}

fn parse_wall(s: &str) -> Option<(Cell, Cell)> {
    let (a, b) = s.trim().split_once('-')?;
    let point = |p: &str| -> Option<Cell> {
        let inner = p.trim().strip_prefix('(')?.strip_suffix(')')?;
        let (x, y) = inner.split_once(',')?;
        Some(Cell::new(x.trim().parse().ok()?, y.trim().parse().ok()?))
    };
    Some((point(a)?, point(b)?))
}

/// Same dimensions and walls as `base`; the base's items and the start are
/// placed on distinct cells drawn uniformly at random, the start on a cell
/// without items. Layouts where some item cannot be reached without breaking
/// a decoration are redrawn.
pub fn random_grid(base: &GridLayout, seed: u64) -> GridLayout {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pieces: Vec<Item> = base.items.iter().flatten().copied().collect();
    let n = base.num_cells();
    assert!(pieces.len() < n, "no room left for the start cell");
    loop {
        let mut cells: Vec<usize> = (0..n).collect();
        let (chosen, _) = cells.partial_shuffle(&mut rng, pieces.len() + 1);
        let mut items = vec![None; n];
        for (item, &i) in pieces.iter().zip(chosen.iter()) {
            items[i] = Some(*item);
        }
        let start = base.cell_at(chosen[pieces.len()]);
        let layout = GridLayout::new(base.width, base.height, items, start, base.walls.iter().copied())
            .expect("walls copied from a valid layout");
        if layout.items_reachable() {
            return layout;
        }
        // keep the stream moving so a rejected draw is not repeated
        let _: u32 = rng.gen();
    }
}
