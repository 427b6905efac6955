
"""Version info."""

__all__ = ['package_version']

# PEP 440 version: [N!]N(.N)*[{a|b|rc}N][.postN][.devN]

package_version = "1.0.0"
