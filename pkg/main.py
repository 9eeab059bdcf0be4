"""
CFT Security Workbench - Main Application
"""
from src.cli import run

if __name__ == "__main__":
    run()
