import os
import re
import yaml
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

from .errors import RecipeError

logger = logging.getLogger(__name__)

RECIPE_FILE = "RECIPE.md"
_EXPECTATION = re.compile(r"^\s*([\w\-]+)\s*(>=|>)\s*([\w\-]+)\s*$")
# keys of an arm entry that are not training options
_ARM_KEYS = {"name", "baseline"}


@dataclass(frozen=True)
class Expectation:
    left: str
    op: str
    right: str
    soft: bool = False

    @classmethod
    def parse(cls, text: str, soft: bool = False) -> "Expectation":
        match = _EXPECTATION.match(str(text))
        if not match:
            raise RecipeError(f"Cannot parse expectation {text!r}; use 'arm_a > arm_b' or 'arm_a >= arm_b'")
        return cls(match.group(1), match.group(2), match.group(3), soft)

    def holds(self, left_value: int, right_value: int) -> bool:
        return left_value > right_value if self.op == ">" else left_value >= right_value

    def __str__(self) -> str:
        return f"{self.left} {self.op} {self.right}"


@dataclass
class RecipeArm:
    name: str
    overrides: Dict[str, Any]
    baseline: Optional[str] = None


@dataclass
class Recipe:
    name: str
    description: str
    base: Dict[str, Any]
    arms: List[RecipeArm]
    expectations: List[Expectation] = field(default_factory=list)
    seeds: List[int] = field(default_factory=lambda: [1])
    min_passing_seeds: int = 1
    max_overhead: Optional[float] = None
    folder_path: Optional[str] = None

    def arm(self, name: str) -> RecipeArm:
        for arm in self.arms:
            if arm.name == name:
                return arm
        raise RecipeError(f"Recipe '{self.name}' has no arm named '{name}'")

    def arm_config(self, arm: RecipeArm, seed: int) -> Dict[str, Any]:
        options = dict(self.base)
        options.update(arm.overrides)
        options["seed"] = seed
        return options


class RecipeLoader:
    def __init__(self, recipes_dir: str):
        self.recipes_dir = recipes_dir

    def discover_recipes(self) -> List[Recipe]:
        """
        Scans the recipes directory for folders containing RECIPE.md.
        """
        recipes = []
        if not os.path.exists(self.recipes_dir):
            logger.warning(f"Recipes directory not found: {self.recipes_dir}")
            return recipes

        for entry in sorted(os.scandir(self.recipes_dir), key=lambda e: e.name):
            if entry.is_dir():
                recipe_md_path = os.path.join(entry.path, RECIPE_FILE)
                if os.path.exists(recipe_md_path):
                    try:
                        recipes.append(self._parse_recipe_md(recipe_md_path, entry.path))
                    except RecipeError as e:
                        logger.error(f"Error parsing {recipe_md_path}: {e}")

        return recipes

    def get(self, name: str) -> Recipe:
        recipe_md_path = os.path.join(self.recipes_dir, name, RECIPE_FILE)
        if not os.path.exists(recipe_md_path):
            known = [r.name for r in self.discover_recipes()]
            raise RecipeError(f"Recipe '{name}' not found in {self.recipes_dir}; available: {known}")
        return self._parse_recipe_md(recipe_md_path, os.path.dirname(recipe_md_path))

    def read_document(self, name: str) -> str:
        recipe_md_path = os.path.join(self.recipes_dir, name, RECIPE_FILE)
        with open(recipe_md_path, "r", encoding="utf-8") as f:
            return f.read()

    def _parse_recipe_md(self, file_path: str, folder_path: str) -> Recipe:
        """
        Parses the YAML frontmatter from a RECIPE.md file.
        """
        with open(file_path, "r", encoding="utf-8") as f:
            content = f.read()

        parts = content.split("---", 2)
        if not content.startswith("---") or len(parts) < 3:
            raise RecipeError("missing '---' YAML frontmatter")

        try:
            frontmatter = yaml.safe_load(parts[1]) or {}
        except yaml.YAMLError as e:
            raise RecipeError(f"invalid YAML frontmatter: {e}")

        name = frontmatter.get("name")
        description = frontmatter.get("description")
        arms_raw = frontmatter.get("arms") or []
        if not name or not description or not arms_raw:
            raise RecipeError("frontmatter needs name, description and at least one arm")

        arms = []
        for raw in arms_raw:
            if not isinstance(raw, dict) or "name" not in raw:
                raise RecipeError(f"arm entries need a name, got {raw!r}")
            overrides = {k: v for k, v in raw.items() if k not in _ARM_KEYS}
            arms.append(RecipeArm(str(raw["name"]), overrides, raw.get("baseline")))

        expectations = [Expectation.parse(e) for e in frontmatter.get("expect") or []]
        expectations += [Expectation.parse(e, soft=True) for e in frontmatter.get("soft_expect") or []]
        arm_names = {arm.name for arm in arms}
        for expectation in expectations:
            missing = {expectation.left, expectation.right} - arm_names
            if missing:
                raise RecipeError(f"expectation '{expectation}' names unknown arms {sorted(missing)}")

        seeds = [int(s) for s in frontmatter.get("seeds") or [1]]
        return Recipe(
            name=str(name),
            description=str(description),
            base=dict(frontmatter.get("base") or {}),
            arms=arms,
            expectations=expectations,
            seeds=seeds,
            min_passing_seeds=int(frontmatter.get("min_passing_seeds", len(seeds))),
            max_overhead=frontmatter.get("max_overhead"),
            folder_path=folder_path,
        )
