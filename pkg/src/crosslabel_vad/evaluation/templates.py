"""Markdown report rendering with jinja2 templates shipped as package data."""

from enum import Enum
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from jinja2 import BaseLoader, Environment, TemplateError, TemplateNotFound

from ..exceptions import DataError

TEMPLATE_DIR = Path(__file__).parent / "data" / "templates"


class TemplateType(Enum):
    """Supported report templates."""

    SUMMARY = "summary"
    ABLATION = "ablation"


class MemoryTemplateLoader(BaseLoader):
    """In-memory template loader for Jinja2."""

    def __init__(self, templates: Dict[str, str]):
        self.templates = templates

    def get_source(
        self, environment: Environment, template: str
    ) -> Tuple[str, None, None]:
        if template not in self.templates:
            raise TemplateNotFound(template)
        return self.templates[template], None, None


def pct(value: float) -> str:
    """Metric in [0, 1] as a percentage with two decimals."""
    return f"{100.0 * value:.2f}"


def signed_pct(value: float) -> str:
    return f"{100.0 * value:+.2f}"


class ReportTemplates:
    """Repository of the run summary and ablation report templates."""

    def __init__(self, template_dir: Optional[Path] = None):
        self._template_dir = Path(template_dir) if template_dir else TEMPLATE_DIR
        self._templates = self._load_builtin_templates()
        self._env = Environment(
            loader=MemoryTemplateLoader(self._templates),
            autoescape=False,
            trim_blocks=True,
            lstrip_blocks=True,
            keep_trailing_newline=True,
        )
        self._env.filters["pct"] = pct
        self._env.filters["signed_pct"] = signed_pct

    def _load_builtin_templates(self) -> Dict[str, str]:
        templates = {}
        for template_type in TemplateType:
            path = self._template_dir / f"{template_type.value}.md.j2"
            try:
                templates[template_type.value] = path.read_text(encoding="utf-8")
            except OSError as e:
                raise DataError(
                    f"Cannot read report template {path}: {e}", path=str(path)
                ) from e
        return templates

    def get_template(self, template_type: TemplateType) -> str:
        """Get raw template content."""
        return self._templates[template_type.value]

    def render_template(
        self, template_type: TemplateType, context: Optional[Dict[str, Any]] = None
    ) -> str:
        """Render template with provided context."""
        try:
            template = self._env.get_template(template_type.value)
            return template.render(**(context or {}))
        except TemplateError as e:
            raise DataError(
                f"Rendering the {template_type.value} report failed: {e}"
            ) from e

    def render_to(
        self,
        template_type: TemplateType,
        path: Path,
        context: Optional[Dict[str, Any]] = None,
    ) -> Path:
        text = self.render_template(template_type, context)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text, encoding="utf-8")
        except OSError as e:
            raise DataError(f"Cannot write {path}: {e}", path=str(path)) from e
        return path


_templates: Optional[ReportTemplates] = None


def get_report_templates() -> ReportTemplates:
    """Process-wide template repository, loaded on first use."""
    global _templates
    if _templates is None:
        _templates = ReportTemplates()
    return _templates
