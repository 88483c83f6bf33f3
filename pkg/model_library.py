# model_library.py
# This module contains the bundled example reaction networks.
# Models live as DSL files under models/ and are addressed as "builtin:<name>".

import logging
import os
from typing import Any, Dict, List

from errors import ModelInputError
from netparse import ReactionNetwork, load_network, parse_network

# Configure logging
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

BUILTIN_PREFIX = "builtin:"


class ModelLibrary:
    """
    Library of bundled reaction networks.
    Includes the toggle-switch example and small linear test networks.
    """

    def __init__(self, directory: str = None):
        self.directory = directory or os.path.join(os.path.dirname(os.path.abspath(__file__)), "models")
        self.sources = self._load_sources()

    def _load_sources(self) -> Dict[str, str]:
        """Read every models/*.crn file"""
        sources = {}
        if not os.path.isdir(self.directory):
            logger.warning(f"Model directory {self.directory} not found")
            return sources
        for filename in sorted(os.listdir(self.directory)):
            if filename.endswith(".crn"):
                with open(os.path.join(self.directory, filename), encoding="utf-8") as handle:
                    sources[filename[:-4]] = handle.read()
        return sources

    def list_models(self) -> List[str]:
        return sorted(self.sources)

    def get_model_text(self, name: str) -> str:
        if name not in self.sources:
            raise ModelInputError(f"unknown builtin model '{name}'; available: {', '.join(self.list_models())}")
        return self.sources[name]

    def load(self, name: str) -> ReactionNetwork:
        """Parse a bundled model"""
        return parse_network(self.get_model_text(name))

    def exists(self, spec: str) -> bool:
        if spec.startswith(BUILTIN_PREFIX):
            return spec[len(BUILTIN_PREFIX):] in self.sources
        return os.path.isfile(spec)

    def resolve(self, spec: str) -> ReactionNetwork:
        """Load 'builtin:<name>' from the library, anything else from the file system"""
        if spec.startswith(BUILTIN_PREFIX):
            return self.load(spec[len(BUILTIN_PREFIX):])
        return load_network(spec)

    def get_library_stats(self) -> Dict[str, Any]:
        stats = {}
        for name in self.list_models():
            net = self.load(name)
            stats[name] = {"species": len(net.species), "reactions": len(net.reactions), "volume": net.volume}
        return stats


# Global instance
model_library = ModelLibrary()
