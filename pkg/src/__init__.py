"""
CFT security workbench: a custom file transfer protocol, a reference server
with toggleable seeded flaws, an attack client and a differential test harness
"""

__version__ = "1.0.0"
__author__ = "CFT Workbench Team"
