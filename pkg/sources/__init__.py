"""Public datasets used for the case studies."""

from .ihdp import IHDPSource
from .lalonde import LalondeSource
from .titanic import TitanicSource

SOURCES = {
    "titanic": TitanicSource,
    "lalonde": LalondeSource,
    "ihdp": IHDPSource,
}
