"""
Copies README.md to index.md. Also lists the CLI subcommands and the flows behind
them under the Subcommands heading.
"""

from pathlib import Path
from textwrap import dedent

import mkdocs_gen_files
from typer.main import get_command

from prefect_octacage.cli import app

COLLECTION_SLUG = "prefect_octacage"


def find_subcommands():
    command = get_command(app)
    return {
        name: (subcommand.help or "").strip().splitlines()[0]
        for name, subcommand in sorted(command.commands.items())
    }


def insert_subcommands(generated_file):
    subcommands = find_subcommands()
    if len(subcommands) == 0:
        return
    generated_file.write("## Subcommands\n")
    generated_file.write(
        dedent(
            """
            Every subcommand reads a flat `key = value` configuration with
            `--config` and runs one Prefect flow from
            [`prefect_octacage.flows`][prefect_octacage.flows].
            """
        )
    )
    for name, summary in subcommands.items():
        generated_file.write(f"- **`octacage {name}`**: {summary}\n")
    generated_file.write("\n")


readme_path = Path("README.md")
docs_index_path = Path("index.md")

with open(readme_path, "r") as readme:
    with mkdocs_gen_files.open(docs_index_path, "w") as generated_file:
        for line in readme:
            if line.startswith("Visit the full docs [here]("):
                continue  # prevent linking to itself
            if line.startswith("## Resources"):
                insert_subcommands(generated_file)
            generated_file.write(line)

    mkdocs_gen_files.set_edit_path(Path(docs_index_path), readme_path)
