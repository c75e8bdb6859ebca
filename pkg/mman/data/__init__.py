from .sample import Sample as Sample
from .labels import TaxonomyMap as TaxonomyMap
from .labels import low_res_target as low_res_target
from .labels import merge_taxonomy as merge_taxonomy
from .labels import to_index as to_index
from .labels import to_one_hot as to_one_hot
from .synth import FigureSpec as FigureSpec
from .synth import synth_figure as synth_figure
from .augment import augment as augment
from .augment import flip_sample as flip_sample
from .corrupt import corrupt_map as corrupt_map
from .folder import DatasetFolder as DatasetFolder
from .folder import load_dataset as load_dataset
from .folder import write_dataset as write_dataset
from .stream import SampleStream as SampleStream
