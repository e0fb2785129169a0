#pragma once

#include <json.hpp>

#include "stg/ingest.hpp"
#include "stg/model.hpp"

namespace fixtures {

using nlohmann::json;

// Two-level toy: 2 segments over 4 motifs. Small enough for exhaustive
// partition-respecting alignment (2! * 4! * 2! * 2! * 1! states).
inline json seg_motif_record() {
    return json::parse(R"({
      "version": 1,
      "piece": {"title": "toy", "duration": 8.0},
      "levels": {
        "segmentation": [
          {"label": 0, "start": 0.0, "end": 4.0},
          {"label": 1, "start": 4.0, "end": 8.0}
        ],
        "motif": [
          {"pattern": 0, "start": 0.0, "end": 1.5},
          {"pattern": 1, "start": 1.6, "end": 3.0},
          {"pattern": 0, "start": 4.0, "end": 5.5},
          {"pattern": "filler", "start": 5.5, "end": 8.0}
        ]
      }
    })");
}

inline stg::StructuralTemporalGraph seg_motif_toy() {
    return stg::ingest(seg_motif_record(),
                       {stg::LevelKind::Segmentation, stg::LevelKind::Motif});
}

// Full five-level record with straddling children at every boundary.
inline json five_level_record() {
    return json::parse(R"({
      "version": 1,
      "piece": {"title": "mini", "duration": 8.0},
      "levels": {
        "segmentation": [
          {"label": 0, "start": 0.0, "end": 4.0},
          {"label": 1, "start": 4.0, "end": 8.0}
        ],
        "motif": [
          {"pattern": 0, "start": 0.0, "end": 2.0},
          {"pattern": 1, "start": 2.0, "end": 4.0},
          {"pattern": "filler", "start": 4.0, "end": 8.0}
        ],
        "key": [
          {"relative_key_num": 0, "quality": "M", "start": 0.0, "end": 4.0},
          {"relative_key_num": 5, "quality": "m", "start": 4.0, "end": 8.0}
        ],
        "chord": [
          {"quality": "M", "degree1": 1, "degree2": 1, "start": 0.0, "end": 2.0},
          {"quality": "m", "degree1": 2, "degree2": 2, "start": 2.0, "end": 4.0},
          {"quality": "M", "degree1": 5, "degree2": 5, "start": 4.0, "end": 6.0},
          {"quality": "D7", "degree1": 5, "degree2": 1, "start": 6.0, "end": 8.0}
        ],
        "melody": [
          {"abs_interval": 2, "interval_sign": "+", "start": 0.0, "end": 1.0},
          {"abs_interval": 1, "interval_sign": "-", "start": 1.0, "end": 2.5},
          {"abs_interval": 3, "interval_sign": "+", "start": 2.5, "end": 4.5},
          {"abs_interval": 2, "interval_sign": "-", "start": 4.5, "end": 6.5},
          {"abs_interval": 4, "interval_sign": "+", "start": 6.5, "end": 8.0}
        ]
      }
    })");
}

// Key + chord toy with three values in every chord feature group. Its pool of
// individually flippable cells is much larger than ceil(|E|/2), so random edit
// scripts of different variants rarely overlap — needed for corpora whose base
// is a genuine centroid. Still exhaustively alignable
// (2! * 4! * 2! * 2! * 3! * 3! * 3! states).
inline json key_chord_record() {
    return json::parse(R"({
      "version": 1,
      "piece": {"title": "toy2", "duration": 8.0},
      "levels": {
        "key": [
          {"relative_key_num": 0, "quality": "M", "start": 0.0, "end": 4.0},
          {"relative_key_num": 1, "quality": "m", "start": 4.0, "end": 8.0}
        ],
        "chord": [
          {"quality": "M",  "degree1": 1, "degree2": 1, "start": 0.0, "end": 2.0},
          {"quality": "D7", "degree1": 5, "degree2": 1, "start": 2.0, "end": 4.0},
          {"quality": "m",  "degree1": 4, "degree2": 3, "start": 4.0, "end": 6.0},
          {"quality": "M",  "degree1": 5, "degree2": 5, "start": 6.0, "end": 8.0}
        ]
      }
    })");
}

inline stg::StructuralTemporalGraph key_chord_toy() {
    return stg::ingest(key_chord_record(), {stg::LevelKind::Key, stg::LevelKind::Chord});
}

// Eight chords drawing from three-value feature groups, every value used by
// two or more chords. Shared values make every prototype row carry several
// instance edges, so permuting prototypes (or chord rows, pinned by the chain)
// during alignment is expensive: random edit scripts on this base stay
// mutually far apart instead of being absorbed by a cheap permutation — the
// regime the equidistant-corpus argument needs.
inline json chord_shared_record() {
    return json::parse(R"({
      "version": 1,
      "piece": {"title": "toy3", "duration": 16.0},
      "levels": {
        "key": [
          {"relative_key_num": 0, "quality": "M", "start": 0.0, "end": 8.0},
          {"relative_key_num": 1, "quality": "m", "start": 8.0, "end": 16.0}
        ],
        "chord": [
          {"quality": "M",  "degree1": 1, "degree2": 1, "start": 0.0,  "end": 2.0},
          {"quality": "m",  "degree1": 4, "degree2": 3, "start": 2.0,  "end": 4.0},
          {"quality": "D7", "degree1": 5, "degree2": 5, "start": 4.0,  "end": 6.0},
          {"quality": "M",  "degree1": 1, "degree2": 3, "start": 6.0,  "end": 8.0},
          {"quality": "m",  "degree1": 4, "degree2": 5, "start": 8.0,  "end": 10.0},
          {"quality": "D7", "degree1": 5, "degree2": 1, "start": 10.0, "end": 12.0},
          {"quality": "M",  "degree1": 4, "degree2": 3, "start": 12.0, "end": 14.0},
          {"quality": "m",  "degree1": 5, "degree2": 5, "start": 14.0, "end": 16.0}
        ]
      }
    })");
}

inline stg::StructuralTemporalGraph chord_shared_toy() {
    return stg::ingest(chord_shared_record(), {stg::LevelKind::Key, stg::LevelKind::Chord});
}

inline std::set<stg::LevelKind> all_levels() {
    return {stg::LevelKind::Segmentation, stg::LevelKind::Motif, stg::LevelKind::Key,
            stg::LevelKind::Chord, stg::LevelKind::Melody};
}

inline stg::StructuralTemporalGraph five_level_toy() {
    return stg::ingest(five_level_record(), all_levels());
}

}  // namespace fixtures
