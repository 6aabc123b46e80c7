from pathlib import Path


def resolve_dataset_dir(name_or_path, data_root) -> Path:
    """
    Pure function. No I/O beyond an existence check.

    An existing path wins; otherwise a bare name like "MUTAG" is looked up
    under the data root (LAMP_DATA_DIR).
    """
    candidate = Path(name_or_path).expanduser()
    if candidate.is_dir():
        return candidate
    return Path(data_root).expanduser() / str(name_or_path)


def needs_degree_features(dataset) -> bool:
    # Social datasets (REDDIT, IMDB, COLLAB) ship without node labels
    return not dataset.metadata.get("has_node_labels", True)
