"""Dataset directories: image/label raster pairs listed in a manifest."""
import logging
from pathlib import Path
from typing import Iterable, Optional

import chardet
import numpy as np
import pandas as pd
import pandas.errors

from mman.config import DataConfig, resolve_config_path
from mman.data.labels import (
    TaxonomyMap, load_image, load_label_image, merge_taxonomy, save_image, save_label_image, to_index, to_one_hot,
)
from mman.data.sample import Sample
from mman.data.synth import synth_figure

logger = logging.getLogger(__name__)

MANIFEST = "manifest.csv"
MANIFEST_COLUMNS = ("image", "label")


class DatasetFolder:
    def __init__(self, folder_path: Path | str, create: bool = False):
        """Directory holding `images/`, `labels/` and a manifest pairing them.

        Functions:
            - open_manifest(): reads the manifest into a DataFrame
            - index_files(): lists files by extension
            - read_samples(): loads every manifest pair as a Sample
            - write_samples(): saves samples as rasters plus a manifest

        :param folder_path: the dataset directory
        :param create: make the directory when it does not exist yet
        """
        if isinstance(folder_path, str):
            folder_path = Path(folder_path)
        self.path = folder_path
        if create:
            self.path.mkdir(parents=True, exist_ok=True)

        if not self.path.is_dir():
            raise ValueError(f"Expected a path to a dataset directory. Got {self.path}.")

    def __repr__(self):
        return f"DatasetFolder<{self.path}>"

    def open_manifest(self, name: str | Path = MANIFEST) -> pd.DataFrame:
        """manifest as a DataFrame with `image` and `label` columns, paths relative to the folder"""
        file_path = Path(name)
        if not file_path.exists():
            file_path = self.path / file_path
        if not file_path.exists():
            raise FileNotFoundError(f"No manifest `{name}` in `{self.path}`.")

        try:
            manifest = pd.read_csv(file_path, dtype=str)
        except pandas.errors.ParserError:
            logger.warning(f"could not parse {file_path.name} in C, reparsing in python")
            manifest = pd.read_csv(file_path, dtype=str, engine="python", on_bad_lines="warn")
        except UnicodeDecodeError:
            with open(file_path, "rb") as f:
                encoding = chardet.detect(f.read())["encoding"]
            logger.warning(f"{file_path.name} is not utf-8, reparsing as {encoding}")
            manifest = pd.read_csv(file_path, dtype=str, encoding=encoding)

        missing = [c for c in MANIFEST_COLUMNS if c not in manifest.columns]
        if missing:
            raise KeyError(f"Missing expected columns {missing} in {file_path.stem} file.")
        return manifest

    def index_files(self, file_ext: str, filename_convention: Optional[str] = "*", recurse: bool = False) -> list[Path]:
        """sorted Paths matching the extension, hidden and lock files skipped"""
        pattern = f"{filename_convention}{file_ext}"
        candidates = self.path.rglob(pattern) if recurse else self.path.glob(pattern)
        return sorted(f for f in candidates if not f.name.startswith("~") and not f.name.startswith("."))

    def read_samples(
            self,
            num_classes: int,
            manifest: str | Path = MANIFEST,
            taxonomy: TaxonomyMap | None = None,
    ) -> list[Sample]:
        """loads every pair; labels are merged through `taxonomy` when given"""
        samples = []
        source_classes = taxonomy.source_classes if taxonomy is not None else num_classes
        for row in self.open_manifest(manifest).itertuples(index=False):
            raw = load_image(self.path / row.image)
            index = load_label_image(self.path / row.label, source_classes)
            if taxonomy is not None:
                index = merge_taxonomy(index, taxonomy)
            if raw.shape[1:] != index.shape:
                raise ValueError(f"`{row.image}` is {raw.shape[1:]} but `{row.label}` is {index.shape}.")
            image = raw - raw.mean(axis=(1, 2), keepdims=True)
            samples.append(Sample(
                image=image,
                label=to_one_hot(index, num_classes),
                meta={"image": row.image, "label": row.label, "mean_subtracted": True, "mean": raw.mean(axis=(1, 2))},
            ))
        logger.info(f"loaded {len(samples)} samples from {self.path}")
        return samples

    def write_samples(self, samples: Iterable[Sample], manifest: str = MANIFEST) -> Path:
        """writes `images/NNNNN.png`, `labels/NNNNN.png` and the manifest; returns the manifest path"""
        (self.path / "images").mkdir(exist_ok=True)
        (self.path / "labels").mkdir(exist_ok=True)
        rows = []
        for i, sample in enumerate(samples):
            image = sample.image + np.asarray(sample.meta.get("mean", 0.0)).reshape(-1, 1, 1)
            image_name, label_name = f"images/{i:05d}.png", f"labels/{i:05d}.png"
            save_image(image, self.path / image_name)
            save_label_image(to_index(sample.label), self.path / label_name)
            rows.append({"image": image_name, "label": label_name})
        frame = pd.DataFrame(rows, columns=list(MANIFEST_COLUMNS))
        frame.to_csv(self.path / manifest, index=False)
        return self.path / manifest


def sample_seed(data_seed: int, index: int) -> int:
    """independent synthetic seed for sample `index` of a dataset"""
    return int(np.random.SeedSequence([data_seed, index]).generate_state(1)[0])


def synthetic_samples(data_seed: int, start: int, count: int, size: int) -> list[Sample]:
    return [synth_figure(sample_seed(data_seed, i), (size, size)) for i in range(start, start + count)]


def write_dataset(samples: Iterable[Sample], out_dir: str | Path) -> Path:
    return DatasetFolder(out_dir, create=True).write_samples(samples)


def load_dataset(config: DataConfig) -> tuple[list[Sample], list[Sample]]:
    """(training samples, held-out samples) from the manifest or the seeded synthetic generator

    A manifest dataset is split by taking the last `holdout` rows out of training.
    """
    if config.manifest:
        manifest = Path(config.manifest)
        taxonomy = TaxonomyMap.from_file(resolve_config_path(config.taxonomy)) if config.taxonomy else None
        samples = DatasetFolder(manifest.parent).read_samples(config.num_classes, manifest.name, taxonomy)
        if config.holdout >= len(samples):
            raise ValueError(f"`holdout` ({config.holdout}) leaves no training samples out of {len(samples)}.")
        split = len(samples) - config.holdout
        return samples[:split], samples[split:]

    if config.num_classes != 7:
        raise ValueError(f"Synthetic figures have 7 classes; `num_classes` is {config.num_classes}. Give a manifest.")
    train = synthetic_samples(config.data_seed, 0, config.count, config.image_size)
    holdout = synthetic_samples(config.data_seed, config.count, config.holdout, config.image_size)
    return train, holdout

