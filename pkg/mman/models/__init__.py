from .generator import DualOutputGenerator as DualOutputGenerator
from .generator import GeneratorOutput as GeneratorOutput
from .generator import generator_forward as generator_forward
from .discriminator import Discriminator as Discriminator
from .discriminator import discriminator_score as discriminator_score
from .discriminator import macro_d_forward as macro_d_forward
from .discriminator import micro_d_forward as micro_d_forward
from .variants import VARIANT_KINDS as VARIANT_KINDS
from .variants import ModelSet as ModelSet
from .variants import VariantSpec as VariantSpec
from .variants import build_variant as build_variant
from .variants import variant_table as variant_table
