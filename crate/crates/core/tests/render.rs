//! Rasterizer geometry checked with pixel-level oracles.

use raven_core::grammar::{
    ComponentState, Entity, FigureConfiguration, PanelState, ANGLE_VALUES, SIZE_VALUES, TYPE_NAMES,
};
use raven_core::render::{cell_pixels, render_panel, render_sheet, PanelImage, SheetLayout, BACKGROUND, PANEL_SIZE};
use raven_core::{generate_indexed, RuleMode};

fn entity(slot: u8, type_idx: u8, size_idx: u8, color_idx: u8, angle_idx: u8) -> Entity {
    Entity {
        slot,
        type_idx,
        size_idx,
        color_idx,
        angle_idx,
    }
}

fn single(config: FigureConfiguration, entities: Vec<Entity>) -> PanelState {
    PanelState {
        config,
        components: vec![ComponentState {
            uniformity: true,
            entities,
        }],
    }
}

/// Number of 8-connected foreground regions, by flood fill.
fn regions(image: &PanelImage) -> usize {
    let (w, h) = (image.width as i64, image.height as i64);
    let mut seen = vec![false; (w * h) as usize];
    let mut count = 0;
    for start in 0..(w * h) {
        if seen[start as usize] || image.get((start % w) as u32, (start / w) as u32) == BACKGROUND {
            continue;
        }
        count += 1;
        let mut stack = vec![start];
        seen[start as usize] = true;
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w || ny >= h {
                        continue;
                    }
                    let j = ny * w + nx;
                    if !seen[j as usize] && image.get(nx as u32, ny as u32) != BACKGROUND {
                        seen[j as usize] = true;
                        stack.push(j);
                    }
                }
            }
        }
    }
    count
}

#[test]
fn grid_with_two_entities_has_two_regions() {
    for a in 0..4u8 {
        for b in a + 1..4 {
            for t in 0..TYPE_NAMES.len() as u8 {
                for s in [0, SIZE_VALUES.len() as u8 - 1] {
                    for c in [0u8, 4, 9] {
                        let panel = single(
                            FigureConfiguration::Grid2x2,
                            vec![entity(a, t, s, c, 1), entity(b, t, s, c, 6)],
                        );
                        assert_eq!(
                            regions(&render_panel(&panel)),
                            2,
                            "slots {a},{b} type {t} size {s} color {c}"
                        );
                    }
                }
            }
        }
    }
}

#[test]
fn full_grid_has_one_region_per_entity() {
    for n in 1..=9u8 {
        let entities = (0..n).map(|s| entity(s, s % 5, 5, 9, s % 8)).collect();
        let panel = single(FigureConfiguration::Grid3x3, entities);
        assert_eq!(regions(&render_panel(&panel)), n as usize);
    }
}

#[test]
fn no_pixel_leaves_its_cell() {
    for config in FigureConfiguration::ALL {
        for (ci, spec) in config.components().iter().enumerate() {
            for (slot, cell) in spec.slots.iter().enumerate() {
                let px = cell_pixels(cell, PANEL_SIZE);
                for t in 0..TYPE_NAMES.len() as u8 {
                    for angle in 0..ANGLE_VALUES.len() as u8 {
                        let mut panel = PanelState {
                            config,
                            components: config
                                .components()
                                .iter()
                                .map(|_| ComponentState {
                                    uniformity: true,
                                    entities: Vec::new(),
                                })
                                .collect(),
                        };
                        panel.components[ci].entities.push(entity(slot as u8, t, 5, 9, angle));
                        let image = render_panel(&panel);
                        for y in 0..PANEL_SIZE {
                            for x in 0..PANEL_SIZE {
                                if image.get(x, y) != BACKGROUND {
                                    let (cx, cy) = (x as f64 + 0.5, y as f64 + 0.5);
                                    assert!(
                                        cx >= px.x && cx <= px.right() && cy >= px.y && cy <= px.bottom(),
                                        "{config} component {ci} slot {slot} type {t} pixel ({x},{y})"
                                    );
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn sizes_grow_strictly_on_center() {
    for t in 0..TYPE_NAMES.len() as u8 {
        let counts: Vec<usize> = (0..SIZE_VALUES.len() as u8)
            .map(|s| render_panel(&single(FigureConfiguration::Center, vec![entity(0, t, s, 5, 2)])).foreground_count())
            .collect();
        assert!(counts.windows(2).all(|w| w[0] < w[1]), "type {t}: {counts:?}");
    }
}

#[test]
fn sheet_tiles_the_panel_renders() {
    let problem = generate_indexed(9, FigureConfiguration::OutInGrid, 3, RuleMode::Full).unwrap();
    let sheet = render_sheet(&problem);
    let layout = SheetLayout::default();
    assert_eq!((sheet.width, sheet.height), (layout.width(), layout.height()));
    let mut regions = 0;
    for (i, panel) in problem.context.iter().enumerate() {
        let (x, y) = layout.matrix_origin(i);
        assert_eq!(
            sheet.crop(x, y, PANEL_SIZE, PANEL_SIZE),
            render_panel(panel),
            "matrix cell {i}"
        );
        regions += 1;
    }
    for (k, panel) in problem.candidates.iter().enumerate() {
        let (x, y) = layout.candidate_origin(k);
        assert_eq!(
            sheet.crop(x, y, PANEL_SIZE, PANEL_SIZE),
            render_panel(panel),
            "candidate {k}"
        );
        regions += 1;
    }
    assert_eq!(regions, 16);
    // The question cell carries a glyph and nothing from the answer.
    let (qx, qy) = layout.matrix_origin(8);
    let question = sheet.crop(qx, qy, PANEL_SIZE, PANEL_SIZE);
    assert!(question.foreground_count() > 0);
    assert_ne!(question, render_panel(problem.answer()));
    assert_eq!(render_sheet(&problem), sheet);
}

#[test]
fn rendering_is_byte_deterministic() {
    let problem = generate_indexed(4, FigureConfiguration::Grid3x3, 0, RuleMode::Full).unwrap();
    for panel in problem.panels() {
        assert_eq!(
            render_panel(panel).to_png().unwrap(),
            render_panel(&panel.clone()).to_png().unwrap()
        );
    }
}
