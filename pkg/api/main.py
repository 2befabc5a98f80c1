"""
Web API
基准历史的只读报告面板
"""
from fastapi import FastAPI, Header, HTTPException, Depends, Query, status
from fastapi.middleware.cors import CORSMiddleware
import sys
import os

# 添加父目录到路径
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from config import Config
from ehyb import Database

app = FastAPI(title="EHYB 基准报告面板")

# 添加CORS支持
app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


def get_db() -> Database:
    """按当前配置打开历史数据库"""
    return Database(Config.DATABASE_PATH)


def verify_panel_token(x_panel_token: str = Header(default=None)):
    """简单的Header Token校验"""
    if Config.PANEL_TOKEN:
        if x_panel_token != Config.PANEL_TOKEN:
            raise HTTPException(
                status_code=status.HTTP_401_UNAUTHORIZED,
                detail="Unauthorized"
            )
    return True


@app.get("/health")
async def health():
    return {"status": "ok"}


@app.get("/api/reports", dependencies=[Depends(verify_panel_token)])
async def get_reports(limit: int = Query(10, ge=1, le=1000), db: Database = Depends(get_db)):
    """获取最近的基准记录"""
    return {"success": True, "reports": db.get_recent_reports(limit)}


@app.get("/api/conversions", dependencies=[Depends(verify_panel_token)])
async def get_conversions(limit: int = Query(10, ge=1, le=1000), db: Database = Depends(get_db)):
    """获取最近的转换记录"""
    return {"success": True, "conversions": db.get_recent_conversions(limit)}


@app.get("/api/statistics", dependencies=[Depends(verify_panel_token)])
async def get_statistics(db: Database = Depends(get_db)):
    """获取统计数据"""
    return {"success": True, "statistics": db.get_statistics()}


@app.get("/api/config", dependencies=[Depends(verify_panel_token)])
async def get_config():
    """获取配置信息"""
    return {
        "success": True,
        "config": {
            "device_processors": Config.DEVICE_PROCESSORS,
            "warp_size": Config.WARP_SIZE,
            "shm_max_bytes": Config.SHM_MAX_BYTES,
            "value_bytes": Config.VALUE_BYTES,
            "workers": Config.WORKERS,
            "scheduling": Config.SCHEDULING,
            "bench_reps": Config.BENCH_REPS,
            "bench_warmup": Config.BENCH_WARMUP,
        }
    }


if __name__ == "__main__":
    import uvicorn
    print(f"启动Web服务: http://localhost:{Config.WEB_PORT}")
    uvicorn.run(app, host="0.0.0.0", port=Config.WEB_PORT)
