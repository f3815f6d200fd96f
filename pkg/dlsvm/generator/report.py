from jinja2 import Environment, FileSystemLoader
from datetime import datetime
import os

TEMPLATE_DIR = os.path.join(os.path.dirname(__file__), os.pardir, os.pardir, "templates")


def write(filepath: str, title: str, config_echo: dict, records: list[dict], reports: dict) -> bool:
    """
    Render the HTML run report.

    Args:
        filepath (str): Output path of report.html.
        title (str): Page title.
        config_echo (dict): RunConfig.echo() of the run.
        records (list[dict]): Metrics rows in column order.
        reports (dict): Split name -> cross-objective figures (a dict each).
    """
    env = Environment(loader=FileSystemLoader(searchpath=TEMPLATE_DIR), autoescape=True)
    template = env.get_template("report.html.jinja2")
    rendered_html = template.render(
        title=title,
        config=config_echo,
        records=records,
        reports=reports,
        generated=datetime.now().astimezone().isoformat(timespec="seconds"),
    )
    with open(filepath, "w", encoding="utf-8") as f:
        f.write(rendered_html)
    return True
