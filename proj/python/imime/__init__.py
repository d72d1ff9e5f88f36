from ._imime import (
    EpisodeConfig,
    EpisodeResult,
    Error,
    decode_vlq,
    detect_face,
    edge_cog_offset,
    face_orientation,
    greedy_agreement,
    load_config,
    map_estimate,
    oracle_policy,
    parse_config,
    parse_midi,
    run_episode,
    symmetry_score,
    update_values,
    write_outputs,
)

__all__ = [
    "EpisodeConfig",
    "EpisodeResult",
    "Error",
    "decode_vlq",
    "detect_face",
    "edge_cog_offset",
    "face_orientation",
    "greedy_agreement",
    "load_config",
    "map_estimate",
    "oracle_policy",
    "parse_config",
    "parse_midi",
    "run_episode",
    "symmetry_score",
    "update_values",
    "write_outputs",
]
