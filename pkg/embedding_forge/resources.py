from mcp.server.fastmcp import FastMCP

from .recipes import RecipeLoader


def register_resources(mcp: FastMCP, loader: RecipeLoader):
    """Registers resource handlers to the MCP server."""

    @mcp.resource("forge://recipes/{name}")
    def get_recipe(name: str) -> str:
        """
        The full RECIPE.md document: frontmatter (arms, expectations, seeds) and notes.
        """
        try:
            loader.get(name)
            return loader.read_document(name)
        except Exception as e:
            return f"Error reading recipe {name}: {str(e)}"
