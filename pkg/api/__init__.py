"""报告面板 Web API"""
